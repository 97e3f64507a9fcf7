/**
 * End-to-end: the thin client against a locally running service.
 *
 * Spawns the real Python server (journaled file store, management token),
 * seeds a three-page adaptive survey study over the management API, and
 * drives the app's DOM the way a participant would: sign up, consent,
 * dashboard, answer-dependent reveal, blocked Next on a missing required
 * answer, submit, and the new assignment on the dashboard.
 */

import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { SurveyApp } from "../src/app.js";

const PORT = 8977;
const BASE = `http://127.0.0.1:${PORT}`;
const OPS = { "Content-Type": "application/json", Authorization: "Bearer tok-e2e" };

let server: ChildProcess;
let workDir: string;

function expr(doc: unknown): unknown {
  return doc;
}

const EQ_S1_YES = {
  name: "eq",
  args: [
    { name: "getResponseValue", args: [{ str: "S1" }, { str: "scg" }] },
    { str: "yes" },
  ],
};

function required(item: string, slot: string) {
  return [
    {
      key: "required",
      severity: "hard",
      rule: { name: "hasResponse", args: [{ str: item }, { str: slot }] },
      message: "Please answer",
    },
  ];
}

const RULES = {
  format: "caselet-rules/1",
  studyKey: "e2e",
  consentVersion: "c1",
  surveyKeys: ["intake3", "weekly"],
  externalEndpoints: {},
  rules: [
    { on: "ENTER", actions: [{ type: "ADD_SURVEY", surveyKey: "intake3", category: "prio" }] },
    {
      on: { kind: "SUBMIT", surveyKey: "intake3" },
      actions: [{ type: "ADD_SURVEY", surveyKey: "weekly", category: "normal" }],
    },
  ],
};

const SURVEY = {
  format: "caselet-survey/1",
  surveyKey: "intake3",
  versionId: "v1",
  items: [
    {
      itemKey: "S1",
      kind: "question",
      components: [
        { role: "title", text: "Do you currently smoke?" },
        {
          role: "responseGroup",
          response: {
            slotKey: "scg",
            kind: "singleChoice",
            options: [
              { key: "yes", label: "Yes" },
              { key: "no", label: "No" },
            ],
          },
        },
      ],
      validations: required("S1", "scg"),
    },
    {
      itemKey: "S2",
      kind: "question",
      condition: expr(EQ_S1_YES),
      components: [
        { role: "title", text: "How many per day?" },
        {
          role: "responseGroup",
          response: { slotKey: "n", kind: "numberInput", min: 0, max: 100 },
        },
      ],
    },
    { itemKey: "pb1", kind: "pageBreak" },
    {
      itemKey: "S3",
      kind: "question",
      components: [
        { role: "title", text: "Did you feel ill this week?" },
        {
          role: "responseGroup",
          response: {
            slotKey: "scg",
            kind: "singleChoice",
            options: [
              { key: "yes", label: "Yes" },
              { key: "no", label: "No" },
            ],
          },
        },
      ],
      validations: required("S3", "scg"),
    },
    { itemKey: "pb2", kind: "pageBreak" },
    {
      itemKey: "S4",
      kind: "question",
      components: [
        { role: "title", text: "Any of these symptoms?" },
        {
          role: "responseGroup",
          response: {
            slotKey: "mcg",
            kind: "multipleChoice",
            options: [
              { key: "fever", label: "Fever" },
              { key: "cough", label: "Cough" },
              { key: "none", label: "None of these" },
            ],
          },
        },
      ],
    },
  ],
};

async function waitForServer(): Promise<void> {
  for (let attempt = 0; attempt < 150; attempt++) {
    try {
      const response = await fetch(`${BASE}/healthz`);
      if (response.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 150));
  }
  throw new Error("server did not come up");
}

async function mgmtPut(path: string, body: unknown): Promise<void> {
  const response = await fetch(BASE + path, {
    method: "PUT",
    headers: OPS,
    body: JSON.stringify(body),
  });
  if (!response.ok) {
    throw new Error(`seed ${path} failed: ${response.status} ${await response.text()}`);
  }
}

beforeAll(async () => {
  workDir = mkdtempSync(join(tmpdir(), "caselet-e2e-"));
  server = spawn("python3", ["-m", "caselet.cli", "serve"], {
    env: {
      ...process.env,
      CASELET_LISTEN: `127.0.0.1:${PORT}`,
      CASELET_STORE: join(workDir, "store.journal"),
      CASELET_OUTBOX: join(workDir, "outbox.ndjson"),
      CASELET_TOKEN_SECRET: "e2e-secret",
      CASELET_MGMT_TOKENS: JSON.stringify({
        "tok-e2e": { subject: "e2e", scopes: [{ resource: "global", permission: "admin" }] },
      }),
    },
    stdio: ["ignore", "pipe", "pipe"],
  });
  await waitForServer();
  await mgmtPut("/m/v1/studies/e2e/rules", RULES);
  await mgmtPut("/m/v1/studies/e2e/surveys/intake3", SURVEY);
});

afterAll(() => {
  server?.kill();
  rmSync(workDir, { recursive: true, force: true });
});

function q<T extends Element>(selector: string): T {
  const node = document.querySelector<T>(selector);
  if (!node) throw new Error(`missing element: ${selector}`);
  return node;
}

function itemKeys(): string[] {
  return Array.from(document.querySelectorAll<HTMLElement>("[data-item]")).map(
    (node) => node.dataset["item"]!,
  );
}

function pick(itemKey: string, value: string): void {
  const input = q<HTMLInputElement>(`[data-item='${itemKey}'] input[value='${value}']`);
  input.checked = true;
  input.dispatchEvent(new Event("change", { bubbles: true }));
}

describe("survey runner against the live service", () => {
  it("runs the three-page adaptive flow end to end", async () => {
    document.body.innerHTML = "<div id='app'></div>";
    const app = new SurveyApp(q("#app"), {
      baseUrl: BASE,
      studyKey: "e2e",
      debounceMs: 10,
    });
    app.start();

    // -- sign up through the login view
    q<HTMLInputElement>("[name=email]").value = "runner@example.com";
    q<HTMLInputElement>("[name=password]").value = "a very long passphrase";
    q<HTMLButtonElement>("button.signup").click();
    await vi_waitFor(() => document.querySelector("button.consent") !== null);

    // -- consent, then the dashboard shows the prio intake assignment
    q<HTMLButtonElement>("button.consent").click();
    await vi_waitFor(() => document.querySelector(".assignment") !== null);
    const first = q<HTMLElement>(".assignment");
    expect(first.dataset["survey"]).toBe("intake3");
    expect(first.querySelector(".badge")!.className).toContain("prio");

    // -- open the survey: page 1 of 3, S2 hidden, Next blocked (S1 required)
    q<HTMLButtonElement>(".assignment button.start").click();
    await vi_waitFor(() => document.querySelector(".survey") !== null);
    expect(q(".progress").textContent).toBe("Page 1 of 3");
    expect(itemKeys()).toEqual(["S1"]);
    expect(q<HTMLButtonElement>("button.next").disabled).toBe(true);

    // -- answering S1 = yes reveals S2 without a reload
    pick("S1", "yes");
    await app.settle();
    expect(itemKeys()).toEqual(["S1", "S2"]);
    expect(q<HTMLButtonElement>("button.next").disabled).toBe(false);

    // -- type into the revealed number input (debounced commit)
    const number = q<HTMLInputElement>("[data-item='S2'] input");
    number.value = "8";
    number.dispatchEvent(new Event("input", { bubbles: true }));
    await new Promise((resolve) => setTimeout(resolve, 30));
    await app.settle();

    // -- page 2: required S3 unanswered -> Next disabled
    q<HTMLButtonElement>("button.next").click();
    await app.settle();
    expect(q(".progress").textContent).toBe("Page 2 of 3");
    expect(itemKeys()).toEqual(["S3"]);
    expect(q<HTMLButtonElement>("button.next").disabled).toBe(true);
    expect(q("[data-item='S3']").className).toContain("invalid");

    pick("S3", "no");
    await app.settle();
    expect(q<HTMLButtonElement>("button.next").disabled).toBe(false);
    q<HTMLButtonElement>("button.next").click();
    await app.settle();

    // -- page 3: optional multi-select, then submit
    expect(q(".progress").textContent).toBe("Page 3 of 3");
    pick("S4", "cough");
    await app.settle();
    expect(q<HTMLButtonElement>("button.submit").disabled).toBe(false);
    q<HTMLButtonElement>("button.submit").click();
    await vi_waitFor(() => document.querySelector(".view.receipt") !== null);

    // -- the submit is reflected on the dashboard: weekly is now assigned
    q<HTMLButtonElement>("button.to-dashboard").click();
    await vi_waitFor(() => document.querySelector(".assignment") !== null);
    const surveys = Array.from(
      document.querySelectorAll<HTMLElement>(".assignment"),
    ).map((node) => node.dataset["survey"]);
    expect(surveys).toEqual(["weekly"]);
  }, 60000);

  it("going back restores the committed answer from the server snapshot", async () => {
    document.body.innerHTML = "<div id='app'></div>";
    const app = new SurveyApp(q("#app"), {
      baseUrl: BASE,
      studyKey: "e2e",
      debounceMs: 10,
    });
    app.start();
    q<HTMLInputElement>("[name=email]").value = "second@example.com";
    q<HTMLInputElement>("[name=password]").value = "a very long passphrase";
    q<HTMLButtonElement>("button.signup").click();
    await vi_waitFor(() => document.querySelector("button.consent") !== null);
    q<HTMLButtonElement>("button.consent").click();
    await vi_waitFor(() => document.querySelector(".assignment") !== null);
    q<HTMLButtonElement>(".assignment button.start").click();
    await vi_waitFor(() => document.querySelector(".survey") !== null);

    pick("S1", "yes");
    await app.settle();
    q<HTMLButtonElement>("button.next").click();
    await app.settle();
    expect(q(".progress").textContent).toBe("Page 2 of 3");

    q<HTMLButtonElement>("button.prev").click();
    await app.settle();
    expect(q(".progress").textContent).toBe("Page 1 of 3");
    const yes = q<HTMLInputElement>("[data-item='S1'] input[value='yes']");
    expect(yes.checked).toBe(true);
  }, 60000);
});

async function vi_waitFor(check: () => boolean, timeoutMs = 15000): Promise<void> {
  const start = Date.now();
  while (Date.now() - start < timeoutMs) {
    if (check()) return;
    await new Promise((resolve) => setTimeout(resolve, 25));
  }
  throw new Error("condition not met in time");
}
