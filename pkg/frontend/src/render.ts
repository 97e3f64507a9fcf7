/**
 * DOM renderer for server snapshots.
 *
 * Renders exactly what the snapshot says: the item set, option
 * visibility, validation results, and navigation gates all come from the
 * server. Failing hard validations mark the item invalid and show their
 * message; Next/Submit disable off the snapshot's gates.
 */

import type {
  AnswerDoc,
  AnswerValue,
  RenderedItemDoc,
  SnapshotDoc,
  ValidationFailure,
} from "./types.js";
import { localized } from "./types.js";

export interface RenderHandlers {
  /** Immediate commit (choices, date pickers). */
  onCommit(itemKey: string, slotKey: string, value: AnswerValue): void;
  /** Debounced commit (text / number keystrokes). */
  onType(itemKey: string, slotKey: string, value: AnswerValue): void;
  onNext(): void;
  onPrev(): void;
  onSubmit(): void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function answerString(answer: AnswerDoc | undefined): string {
  if (!answer) return "";
  if ("str" in answer) return answer.str;
  if ("num" in answer) return String(answer.num);
  if ("ts" in answer) return String(answer.ts);
  if ("bool" in answer) return answer.bool ? "true" : "false";
  return "";
}

function answerKeys(answer: AnswerDoc | undefined): string[] {
  return answer && "keys" in answer ? answer.keys : [];
}

function renderItem(
  doc: Document,
  item: RenderedItemDoc,
  handlers: RenderHandlers,
  locale?: string,
): HTMLElement {
  const failingHard = (item.validations ?? []).some(
    (v) => v.severity === "hard" && !v.passed,
  );
  const container = el(doc, "section", failingHard ? "item invalid" : "item");
  container.dataset["item"] = item.itemKey;

  for (const component of item.components ?? []) {
    if (component.role === "title") {
      container.appendChild(el(doc, "h3", "title", localized(component.text, locale)));
    } else {
      container.appendChild(el(doc, "p", "subtitle", localized(component.text, locale)));
    }
  }

  const slot = item.slot;
  if (slot) {
    const field = el(doc, "div", `field ${slot.kind}`);
    field.dataset["slot"] = slot.slotKey;
    if (slot.kind === "singleChoice" || slot.kind === "multipleChoice") {
      const multi = slot.kind === "multipleChoice";
      const selected = multi
        ? answerKeys(item.answer)
        : [answerString(item.answer)].filter((k) => k !== "");
      for (const option of slot.options ?? []) {
        if (!option.visible) continue;
        const label = el(doc, "label", "option");
        const input = el(doc, "input");
        input.type = multi ? "checkbox" : "radio";
        input.name = `${item.itemKey}.${slot.slotKey}`;
        input.value = option.key;
        input.checked = selected.includes(option.key);
        input.addEventListener("change", () => {
          if (multi) {
            const boxes = field.querySelectorAll<HTMLInputElement>("input:checked");
            handlers.onCommit(
              item.itemKey,
              slot.slotKey,
              Array.from(boxes).map((b) => b.value),
            );
          } else {
            handlers.onCommit(item.itemKey, slot.slotKey, option.key);
          }
        });
        label.appendChild(input);
        label.appendChild(el(doc, "span", "option-label", localized(option.label, locale)));
        field.appendChild(label);
      }
    } else {
      const input = el(doc, "input", "text-entry");
      input.type = slot.kind === "textInput" ? "text" : "number";
      if (slot.kind === "textInput" && slot.maxLen !== undefined) {
        input.maxLength = slot.maxLen;
      }
      input.value = answerString(item.answer);
      input.addEventListener("input", () => {
        const raw = input.value;
        if (slot.kind === "textInput") {
          handlers.onType(item.itemKey, slot.slotKey, raw);
        } else if (raw !== "" && !Number.isNaN(Number(raw))) {
          handlers.onType(item.itemKey, slot.slotKey, Number(raw));
        }
      });
      field.appendChild(input);
    }
    container.appendChild(field);
  }

  for (const validation of item.validations ?? []) {
    if (validation.passed) continue;
    const cls = validation.severity === "hard" ? "validation-error" : "validation-warning";
    const note = el(doc, "div", cls, localized(validation.message, locale));
    note.dataset["validation"] = validation.key;
    container.appendChild(note);
  }
  return container;
}

export function renderSurvey(
  root: HTMLElement,
  snapshot: SnapshotDoc,
  handlers: RenderHandlers,
  locale?: string,
): void {
  const doc = root.ownerDocument;
  root.textContent = "";
  const view = el(doc, "div", "survey");

  view.appendChild(
    el(doc, "div", "progress", `Page ${snapshot.pageIndex + 1} of ${snapshot.pageCount}`),
  );

  const items = el(doc, "div", "items");
  for (const item of snapshot.items) {
    items.appendChild(renderItem(doc, item, handlers, locale));
  }
  view.appendChild(items);

  const blockedNote = el(doc, "div", "blocked-note");
  blockedNote.style.display = "none";
  view.appendChild(blockedNote);

  const nav = el(doc, "div", "nav");
  const prev = el(doc, "button", "prev", "Back");
  prev.disabled = !snapshot.canGoPrev;
  prev.addEventListener("click", () => handlers.onPrev());
  nav.appendChild(prev);

  const last = snapshot.pageIndex === snapshot.pageCount - 1;
  if (last) {
    const submit = el(doc, "button", "submit", "Submit");
    submit.disabled = !snapshot.canSubmit;
    submit.addEventListener("click", () => handlers.onSubmit());
    nav.appendChild(submit);
  } else {
    const next = el(doc, "button", "next", "Next");
    next.disabled = !snapshot.canGoNext;
    next.addEventListener("click", () => handlers.onNext());
    nav.appendChild(next);
  }
  view.appendChild(nav);
  root.appendChild(view);
}

/** Inline note for a NavigationBlocked / SubmitBlocked response. */
export function showBlocked(root: HTMLElement, failures: ValidationFailure[], detail: string): void {
  const note = root.querySelector<HTMLElement>(".blocked-note");
  if (!note) return;
  const keys = failures.map((f) => f.itemKey).join(", ");
  note.textContent = failures.length
    ? `Please complete the highlighted questions first (${keys}).`
    : detail;
  note.style.display = "";
}
