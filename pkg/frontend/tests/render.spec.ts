import { beforeEach, describe, expect, it, vi } from "vitest";

import { renderSurvey, showBlocked, type RenderHandlers } from "../src/render.js";
import { renderDashboard } from "../src/dashboard.js";
import { LAST_PAGE_READY, PAGE_WITH_CONDITIONAL, snapshotWith } from "./snapshots.js";

function handlers(): RenderHandlers {
  return {
    onCommit: vi.fn(),
    onType: vi.fn(),
    onNext: vi.fn(),
    onPrev: vi.fn(),
    onSubmit: vi.fn(),
  };
}

let root: HTMLElement;

beforeEach(() => {
  document.body.innerHTML = "<div id='root'></div>";
  root = document.getElementById("root")!;
});

describe("renderSurvey", () => {
  it("renders exactly the snapshot's item keys (snapshot fidelity)", () => {
    renderSurvey(root, PAGE_WITH_CONDITIONAL, handlers());
    const rendered = Array.from(root.querySelectorAll<HTMLElement>("[data-item]")).map(
      (node) => node.dataset["item"],
    );
    expect(rendered).toEqual(PAGE_WITH_CONDITIONAL.items.map((i) => i.itemKey));
  });

  it("hides options the server marked invisible", () => {
    renderSurvey(root, PAGE_WITH_CONDITIONAL, handlers());
    const values = Array.from(
      root.querySelectorAll<HTMLInputElement>("[data-item='Q1'] input"),
    ).map((i) => i.value);
    expect(values).toEqual(["yes", "no"]);
  });

  it("marks failing hard validations and shows their message", () => {
    renderSurvey(root, PAGE_WITH_CONDITIONAL, handlers());
    const q1 = root.querySelector("[data-item='Q1']")!;
    expect(q1.className).toContain("invalid");
    expect(q1.querySelector(".validation-error")!.textContent).toBe("Please answer");
    const q2 = root.querySelector("[data-item='Q2']")!;
    expect(q2.className).not.toContain("invalid");
  });

  it("disables Next when the server says canGoNext is false", () => {
    renderSurvey(root, PAGE_WITH_CONDITIONAL, handlers());
    const next = root.querySelector<HTMLButtonElement>("button.next")!;
    expect(next.disabled).toBe(true);
  });

  it("enables Next when the server allows it", () => {
    const snap = snapshotWith({ canGoNext: true }, PAGE_WITH_CONDITIONAL);
    const h = handlers();
    renderSurvey(root, snap, h);
    const next = root.querySelector<HTMLButtonElement>("button.next")!;
    expect(next.disabled).toBe(false);
    next.click();
    expect(h.onNext).toHaveBeenCalledTimes(1);
  });

  it("restores committed answers into the inputs", () => {
    renderSurvey(root, PAGE_WITH_CONDITIONAL, handlers());
    const number = root.querySelector<HTMLInputElement>("[data-item='Q2'] input")!;
    expect(number.value).toBe("12");

    renderSurvey(root, LAST_PAGE_READY, handlers());
    const boxes = Array.from(
      root.querySelectorAll<HTMLInputElement>("[data-item='Q3'] input"),
    );
    expect(boxes.map((b) => b.checked)).toEqual([false, true]);
  });

  it("commits choices immediately and types through the debounced path", () => {
    const h = handlers();
    renderSurvey(root, PAGE_WITH_CONDITIONAL, h);
    const yes = root.querySelector<HTMLInputElement>("[data-item='Q1'] input[value=yes]")!;
    yes.checked = true;
    yes.dispatchEvent(new Event("change", { bubbles: true }));
    expect(h.onCommit).toHaveBeenCalledWith("Q1", "scg", "yes");

    const number = root.querySelector<HTMLInputElement>("[data-item='Q2'] input")!;
    number.value = "7";
    number.dispatchEvent(new Event("input", { bubbles: true }));
    expect(h.onType).toHaveBeenCalledWith("Q2", "n", 7);
    expect(h.onCommit).toHaveBeenCalledTimes(1);
  });

  it("collects all checked keys for multiple choice", () => {
    const h = handlers();
    renderSurvey(root, LAST_PAGE_READY, h);
    const fever = root.querySelector<HTMLInputElement>("input[value=fever]")!;
    fever.checked = true;
    fever.dispatchEvent(new Event("change", { bubbles: true }));
    expect(h.onCommit).toHaveBeenCalledWith("Q3", "mcg", ["fever", "cough"]);
  });

  it("shows Submit (not Next) on the last page, honoring canSubmit", () => {
    const h = handlers();
    renderSurvey(root, LAST_PAGE_READY, h);
    expect(root.querySelector("button.next")).toBeNull();
    const submit = root.querySelector<HTMLButtonElement>("button.submit")!;
    expect(submit.disabled).toBe(false);
    submit.click();
    expect(h.onSubmit).toHaveBeenCalledTimes(1);
  });

  it("renders the requested locale with fallback", () => {
    renderSurvey(root, PAGE_WITH_CONDITIONAL, handlers(), "nl");
    expect(root.querySelector("[data-item='Q1'] .title")!.textContent).toBe("Rookt u?");
    // Q2 has no nl text -> falls back to en
    expect(root.querySelector("[data-item='Q2'] .title")!.textContent).toBe(
      "How many per day?",
    );
  });

  it("renders an inline note for blocked navigation", () => {
    renderSurvey(root, PAGE_WITH_CONDITIONAL, handlers());
    showBlocked(root, [{ itemKey: "Q1", validationKey: "required" }], "blocked");
    const note = root.querySelector<HTMLElement>(".blocked-note")!;
    expect(note.style.display).not.toBe("none");
    expect(note.textContent).toContain("Q1");
  });
});

describe("renderDashboard", () => {
  it("keeps the server's assignment order and shows badges", () => {
    const open = vi.fn();
    renderDashboard(
      root,
      [
        { surveyKey: "intake", category: "prio" },
        { surveyKey: "weekly", category: "normal" },
        { surveyKey: "extra", category: "optional" },
      ],
      open,
    );
    const rows = Array.from(root.querySelectorAll<HTMLElement>(".assignment"));
    expect(rows.map((r) => r.dataset["survey"])).toEqual(["intake", "weekly", "extra"]);
    expect(rows[0]!.querySelector(".badge")!.className).toContain("prio");
    rows[1]!.querySelector("button")!.click();
    expect(open).toHaveBeenCalledWith("weekly");
  });

  it("shows an empty state when there is nothing to do", () => {
    renderDashboard(root, [], vi.fn());
    expect(root.querySelector(".empty-state")).not.toBeNull();
  });
});
