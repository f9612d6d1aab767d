/** Browser bootstrap: wires the controller to the static page regions. */

import { ApiClient } from "./api.js";
import { ConsoleController } from "./console.js";

const API_BASE = (window as { PEDWATCH_API?: string }).PEDWATCH_API ?? "http://127.0.0.1:8000";

function region(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing page region #${id}`);
  return el;
}

async function refresh(controller: ConsoleController): Promise<void> {
  region("reports").innerHTML = (await controller.loadReports()).html;
  region("summary").innerHTML = (await controller.loadStatsSummary()).html;
  region("chart-crosswalks").innerHTML = (
    await controller.loadChart("violations-by-crosswalk")
  ).html;
  region("chart-day-night").innerHTML = (await controller.loadChart("day-night")).html;
  region("chart-weather").innerHTML = (await controller.loadChart("weather")).html;
  region("chat").innerHTML = (await controller.loadChat()).html;
}

export function start(): void {
  const controller = new ConsoleController(new ApiClient(API_BASE));

  const form = region("range-form") as HTMLFormElement;
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const data = new FormData(form);
    controller.setRange({
      from: (data.get("from") as string) || undefined,
      to: (data.get("to") as string) || undefined,
      intersection: (data.get("intersection") as string) || undefined,
    });
    void refresh(controller);
  });

  const chatForm = region("chat-form") as HTMLFormElement;
  chatForm.addEventListener("submit", (event) => {
    event.preventDefault();
    const input = region("chat-input") as HTMLInputElement;
    void controller.ask(input.value).then((result) => {
      region("chat").innerHTML = result.html;
      if (result.kind === "ok") input.value = "";
    });
  });

  void refresh(controller);
}

if (typeof document !== "undefined" && document.getElementById("range-form")) {
  start();
}
