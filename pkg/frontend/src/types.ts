/**
 * Wire types mirroring the server's JSON documents.
 *
 * The client renders these verbatim: all visibility, validation, and
 * navigation decisions are made server-side and arrive in the snapshot.
 */

export type LocalizedText = Record<string, string>;

export interface OptionDoc {
  key: string;
  label: LocalizedText;
  visible: boolean;
}

export interface SlotDoc {
  slotKey: string;
  kind: "singleChoice" | "multipleChoice" | "textInput" | "numberInput" | "dateInput";
  options?: OptionDoc[];
  maxLen?: number;
  min?: number;
  max?: number;
}

export type AnswerDoc =
  | { num: number }
  | { str: string }
  | { bool: boolean }
  | { ts: number }
  | { keys: string[] };

export interface ComponentDoc {
  role: "title" | "subtitle";
  text: LocalizedText;
}

export interface ValidationDoc {
  key: string;
  severity: "hard" | "soft";
  passed: boolean;
  message: LocalizedText;
}

export interface RenderedItemDoc {
  itemKey: string;
  kind: "question" | "display";
  components?: ComponentDoc[];
  slot?: SlotDoc;
  answer?: AnswerDoc;
  validations?: ValidationDoc[];
}

export interface SnapshotDoc {
  pageIndex: number;
  pageCount: number;
  canGoPrev: boolean;
  canGoNext: boolean;
  canSubmit: boolean;
  items: RenderedItemDoc[];
  warnings: string[];
}

export interface AssignmentDoc {
  surveyKey: string;
  category: "prio" | "normal" | "optional";
  validFrom?: number;
  validUntil?: number;
}

export interface ReceiptDoc {
  responseId: string;
  submittedAt: number;
  assignments: AssignmentDoc[];
}

export interface StudyDoc {
  studyKey: string;
  consentVersion: string;
}

export interface ValidationFailure {
  itemKey: string;
  validationKey: string;
}

/** Values the client can commit for a slot. */
export type AnswerValue = string | number | boolean | string[];

export function localized(text: LocalizedText | undefined, locale?: string): string {
  if (!text) return "";
  if (locale && text[locale] !== undefined) return text[locale];
  if (text["en"] !== undefined) return text["en"];
  const first = Object.keys(text).sort()[0];
  return first === undefined ? "" : text[first]!;
}
