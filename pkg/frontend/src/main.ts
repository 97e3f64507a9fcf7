/** Browser entry point: mounts the app on #app using its data attributes. */

import { SurveyApp } from "./app.js";

const mount = document.getElementById("app");
if (mount) {
  const app = new SurveyApp(mount, {
    baseUrl: mount.dataset["baseUrl"] ?? "",
    studyKey: mount.dataset["study"] ?? "",
    locale: mount.dataset["locale"] || undefined,
  });
  app.start();
}
