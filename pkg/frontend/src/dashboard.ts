/** Assignment dashboard: server order preserved, category badges shown. */

import type { AssignmentDoc } from "./types.js";

export function renderDashboard(
  root: HTMLElement,
  assignments: AssignmentDoc[],
  onOpen: (surveyKey: string) => void,
): void {
  const doc = root.ownerDocument;
  root.textContent = "";
  const view = doc.createElement("div");
  view.className = "dashboard";

  const heading = doc.createElement("h2");
  heading.textContent = "Your surveys";
  view.appendChild(heading);

  if (assignments.length === 0) {
    const empty = doc.createElement("p");
    empty.className = "empty-state";
    empty.textContent = "Nothing to fill in right now. Check back later!";
    view.appendChild(empty);
  } else {
    const list = doc.createElement("ul");
    list.className = "assignments";
    for (const assignment of assignments) {
      const entry = doc.createElement("li");
      entry.className = "assignment";
      entry.dataset["survey"] = assignment.surveyKey;

      const badge = doc.createElement("span");
      badge.className = `badge ${assignment.category}`;
      badge.textContent = assignment.category;
      entry.appendChild(badge);

      const name = doc.createElement("span");
      name.className = "survey-name";
      name.textContent = assignment.surveyKey;
      entry.appendChild(name);

      const start = doc.createElement("button");
      start.className = "start";
      start.textContent = "Start";
      start.addEventListener("click", () => onOpen(assignment.surveyKey));
      entry.appendChild(start);

      list.appendChild(entry);
    }
    view.appendChild(list);
  }
  root.appendChild(view);
}
