import { ApiClient, ApiError } from "./api.js";
import { renderItemDetail, renderPanels } from "./render.js";
import { ExplorerStore } from "./state.js";

const api = new ApiClient("");
const store = new ExplorerStore(api);

function mount(): void {
  const form = document.getElementById("query-form") as HTMLFormElement;
  const queryInput = document.getElementById("query-input") as HTMLInputElement;
  const topKInput = document.getElementById("topk-input") as HTMLInputElement;
  const methodsBox = document.getElementById("methods") as HTMLElement;
  const panelsHost = document.getElementById("panels-host") as HTMLElement;
  const drawerHost = document.getElementById("drawer-host") as HTMLElement;

  api
    .methods()
    .then((methods) => {
      for (const method of methods) {
        const label = document.createElement("label");
        const box = document.createElement("input");
        box.type = "checkbox";
        box.value = method;
        box.checked = method === "noqr" || method === "eqr";
        label.appendChild(box);
        label.appendChild(document.createTextNode(method));
        methodsBox.appendChild(label);
      }
    })
    .catch((error) => {
      methodsBox.textContent = String(error);
    });

  store.subscribe((state) => {
    panelsHost.replaceChildren(renderPanels(state.panels));
  });

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const methods = Array.from(
      methodsBox.querySelectorAll<HTMLInputElement>("input:checked"),
    ).map((box) => box.value);
    const query = queryInput.value.trim();
    if (!query || methods.length === 0) return;
    const topK = Math.max(1, Number(topKInput.value) || 10);
    void store.submitQuery(query, methods, topK);
  });

  // Evidence drawer: "all passages" refetches the item so stale views recover.
  panelsHost.addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    if (!target.classList.contains("inspect-item")) return;
    const itemId = target.dataset.itemId;
    if (!itemId) return;
    api
      .item(itemId)
      .then((item) => drawerHost.replaceChildren(renderItemDetail(item)))
      .catch((error: unknown) => {
        const message = error instanceof ApiError ? error.message : String(error);
        const fallback = document.createElement("p");
        fallback.className = "panel-error";
        fallback.textContent = message;
        drawerHost.replaceChildren(fallback);
      });
  });
}

document.addEventListener("DOMContentLoaded", mount);
