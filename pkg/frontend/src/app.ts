/**
 * Top-level application: login/signup, consent, dashboard, survey flow,
 * receipt. A deliberately small state machine over full re-renders.
 */

import { ApiError, CaseletClient } from "./api.js";
import { renderDashboard } from "./dashboard.js";
import { renderSurvey, showBlocked } from "./render.js";
import { SurveyFlowController } from "./session.js";
import type { AssignmentDoc, ReceiptDoc } from "./types.js";

export interface AppConfig {
  baseUrl: string;
  studyKey: string;
  locale?: string;
  /** Keystroke debounce before answers commit (ms). */
  debounceMs?: number;
}

export class SurveyApp {
  readonly api: CaseletClient;
  private flow: SurveyFlowController | null = null;
  private surveyRoot: HTMLElement | null = null;

  constructor(
    private readonly root: HTMLElement,
    private readonly config: AppConfig,
  ) {
    this.api = new CaseletClient(config.baseUrl, config.locale);
  }

  // -- views ------------------------------------------------------------

  start(): void {
    this.renderLogin();
  }

  private doc(): Document {
    return this.root.ownerDocument;
  }

  private clear(view: string): HTMLElement {
    this.root.textContent = "";
    const container = this.doc().createElement("div");
    container.className = `view ${view}`;
    this.root.appendChild(container);
    return container;
  }

  private banner(container: HTMLElement, text: string, retry?: () => void): void {
    const note = this.doc().createElement("div");
    note.className = "banner";
    note.textContent = text;
    if (retry) {
      const button = this.doc().createElement("button");
      button.className = "retry";
      button.textContent = "Retry";
      button.addEventListener("click", () => {
        note.remove();
        retry();
      });
      note.appendChild(button);
    }
    container.prepend(note);
  }

  renderLogin(message = ""): void {
    const view = this.clear("login");
    const doc = this.doc();
    const form = doc.createElement("form");
    form.innerHTML = `
      <h2>Sign in</h2>
      <label>Email <input name="email" type="email" required /></label>
      <label>Password <input name="password" type="password" required /></label>
      <button class="login" type="submit">Sign in</button>
      <button class="signup" type="button">Create account</button>
      <div class="form-error">${message}</div>
    `;
    const submit = async (mode: "login" | "signup") => {
      const email = form.querySelector<HTMLInputElement>("[name=email]")!.value;
      const password = form.querySelector<HTMLInputElement>("[name=password]")!.value;
      try {
        if (mode === "login") await this.api.login(email, password);
        else await this.api.signup(email, password);
        await this.showDashboard();
      } catch (error) {
        const detail = error instanceof ApiError ? error.detail : String(error);
        form.querySelector<HTMLElement>(".form-error")!.textContent = detail;
      }
    };
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      void submit("login");
    });
    form.querySelector<HTMLButtonElement>(".signup")!.addEventListener("click", () => {
      void submit("signup");
    });
    view.appendChild(form);
  }

  private renderConsent(consentVersion: string): void {
    const view = this.clear("consent");
    const doc = this.doc();
    const heading = doc.createElement("h2");
    heading.textContent = `Join the ${this.config.studyKey} study`;
    view.appendChild(heading);
    const text = doc.createElement("p");
    text.className = "consent-text";
    text.textContent =
      "By joining you agree that your survey answers are used for research.";
    view.appendChild(text);
    const button = doc.createElement("button");
    button.className = "consent";
    button.textContent = "I consent — join study";
    button.addEventListener("click", () => {
      void this.api
        .enter(this.config.studyKey, consentVersion)
        .then((assignments) => this.renderDashboardView(assignments))
        .catch((error) => this.handleTopLevel(error));
    });
    view.appendChild(button);
  }

  async showDashboard(): Promise<void> {
    try {
      const assignments = await this.api.assignments(this.config.studyKey);
      this.renderDashboardView(assignments);
    } catch (error) {
      if (error instanceof ApiError && error.code === "NotEntered") {
        const studies = await this.api.studies();
        const study = studies.find((s) => s.studyKey === this.config.studyKey);
        this.renderConsent(study ? study.consentVersion : "1");
        return;
      }
      this.handleTopLevel(error);
    }
  }

  private renderDashboardView(assignments: AssignmentDoc[]): void {
    const view = this.clear("dashboard");
    renderDashboard(view, assignments, (surveyKey) => {
      void this.openSurvey(surveyKey);
    });
  }

  async openSurvey(surveyKey: string): Promise<void> {
    try {
      const { sessionId, snapshot } = await this.api.openSession(
        this.config.studyKey,
        surveyKey,
      );
      const view = this.clear("survey");
      this.surveyRoot = view;
      this.flow = new SurveyFlowController(
        this.api,
        sessionId,
        snapshot,
        {
          onSnapshot: (snap) => this.paintSurvey(snap),
          onReceipt: (receipt) => this.renderReceipt(receipt),
          onBlocked: (failures, detail) => {
            if (this.surveyRoot) showBlocked(this.surveyRoot, failures, detail);
          },
          onNetworkTrouble: (retry) => {
            if (this.surveyRoot) {
              this.banner(this.surveyRoot, "Connection lost — your answers are kept.", retry);
            }
          },
          onFatal: (error) => this.handleTopLevel(error),
        },
        this.config.debounceMs ?? 300,
      );
      this.paintSurvey(snapshot);
    } catch (error) {
      this.handleTopLevel(error);
    }
  }

  private paintSurvey(snapshot: import("./types.js").SnapshotDoc): void {
    if (!this.surveyRoot || !this.flow) return;
    const flow = this.flow;
    renderSurvey(
      this.surveyRoot,
      snapshot,
      {
        onCommit: (item, slot, value) => flow.commitAnswer(item, slot, value),
        onType: (item, slot, value) => flow.typeAnswer(item, slot, value),
        onNext: () => flow.next(),
        onPrev: () => flow.prev(),
        onSubmit: () => flow.submit(),
      },
      this.config.locale,
    );
  }

  private renderReceipt(receipt: ReceiptDoc): void {
    this.flow = null;
    this.surveyRoot = null;
    const view = this.clear("receipt");
    const doc = this.doc();
    const heading = doc.createElement("h2");
    heading.textContent = "Thank you!";
    view.appendChild(heading);
    const line = doc.createElement("p");
    line.className = "receipt-line";
    line.textContent = `Your answers were recorded (receipt ${receipt.responseId}).`;
    view.appendChild(line);
    const button = doc.createElement("button");
    button.className = "to-dashboard";
    button.textContent = "Back to overview";
    button.addEventListener("click", () => {
      void this.showDashboard();
    });
    view.appendChild(button);
  }

  /** Session/token expiry sends the participant back to the login view. */
  private handleTopLevel(error: unknown): void {
    if (error instanceof ApiError && (error.status === 401 || error.status === 410)) {
      this.api.token = null;
      this.renderLogin("Your session has expired — please sign in again.");
      return;
    }
    const view = this.clear("error");
    const note = this.doc().createElement("p");
    note.className = "fatal";
    note.textContent = error instanceof Error ? error.message : String(error);
    view.appendChild(note);
  }

  /** Test hook: resolves when the survey flow has no pending work. */
  settle(): Promise<void> {
    return this.flow ? this.flow.idle() : Promise.resolve();
  }
}
