// Application bootstrap: owns navigation state (item, split, page,
// selected response) and re-renders panes as payloads and panel state
// change. The API base URL comes from ?api=... or the input box.

import { ApiClient } from "./api.js";
import { renderExplanationPanel, renderItemList, renderResponseBrowser, el } from "./render.js";
import { ExplanationStore } from "./state.js";

interface Navigation {
  itemId: string | null;
  split: string;
  page: number;
  pageSize: number;
  disagreementsOnly: boolean;
  responseId: string | null;
}

const PAGE_SIZE = 15;

export function mount(root: HTMLElement, api: ApiClient): { store: ExplanationStore } {
  const nav: Navigation = {
    itemId: null,
    split: "",
    page: 1,
    pageSize: PAGE_SIZE,
    disagreementsOnly: false,
    responseId: null,
  };
  const store = new ExplanationStore(api);

  const itemsPane = el("div", { id: "items-pane" });
  const browserPane = el("div", { id: "browser-pane" });
  const panelPane = el("div", { id: "panel-pane" });
  root.append(itemsPane, browserPane, panelPane);

  async function refreshItems(): Promise<void> {
    try {
      const items = await api.items();
      itemsPane.replaceChildren(
        renderItemList(items, nav.itemId, (itemId) => {
          nav.itemId = itemId;
          nav.page = 1;
          nav.responseId = null;
          void refreshItems();
          void refreshBrowser();
        }),
      );
    } catch (err) {
      itemsPane.replaceChildren(el("div", { class: "toast error" }, [String(err)]));
    }
  }

  async function refreshBrowser(): Promise<void> {
    if (!nav.itemId) {
      browserPane.replaceChildren();
      return;
    }
    try {
      const page = await api.responses(nav.itemId, {
        split: nav.split || undefined,
        page: nav.page,
        pageSize: nav.pageSize,
      });
      browserPane.replaceChildren(
        renderResponseBrowser(page, {
          split: nav.split,
          disagreementsOnly: nav.disagreementsOnly,
          selected: nav.responseId,
          onPage: (p) => {
            nav.page = p;
            void refreshBrowser();
          },
          onFilter: (split, disagreementsOnly) => {
            nav.split = split;
            nav.disagreementsOnly = disagreementsOnly;
            nav.page = 1;
            void refreshBrowser();
          },
          onSelect: (responseId) => {
            nav.responseId = responseId;
            void refreshBrowser();
            void store.load(responseId);
          },
        }),
      );
    } catch (err) {
      browserPane.replaceChildren(el("div", { class: "toast error" }, [String(err)]));
    }
  }

  store.subscribe((state) => {
    panelPane.replaceChildren(
      renderExplanationPanel(state, {
        onToggle: (componentId) => store.toggle(componentId),
        onReset: () => store.reset(),
        onPersist: (author, note) => {
          void store.persist(author, note).then(() => refreshBrowser());
        },
      }),
    );
  });
  panelPane.replaceChildren(
    renderExplanationPanel(store.state, {
      onToggle: () => undefined,
      onReset: () => undefined,
      onPersist: () => undefined,
    }),
  );

  void refreshItems();
  return { store };
}

function bootstrap(): void {
  const root = document.querySelector<HTMLElement>("#app");
  if (!root) return;
  const params = new URLSearchParams(window.location.search);
  const api = new ApiClient(params.get("api") ?? "");

  const baseInput = el("input", {
    type: "text",
    id: "api-base",
    placeholder: "API base URL (e.g. http://127.0.0.1:8000)",
  });
  baseInput.value = api.baseUrl;
  const apply = el("button", {}, ["connect"]);
  const header = el("header", {}, [el("strong", {}, ["score inspector"]), baseInput, apply]);
  document.body.insertBefore(header, root);

  let app = mount(root, api);
  apply.onclick = () => {
    api.baseUrl = baseInput.value.replace(/\/$/, "");
    root.replaceChildren();
    app = mount(root, api);
  };
  void app;
}

if (typeof document !== "undefined" && document.querySelector("#app")) {
  bootstrap();
}
