/** Browser entry point.  The page is a static bundle; the only piece
 * of configuration is the API base URL, taken from the `?api=` query
 * parameter or a `<meta name="api-base">` tag, defaulting to the
 * page's own origin. */

import { ApiClient } from "./api.js";
import { mount } from "./view.js";

function apiBase(): string {
  const fromQuery = new URLSearchParams(window.location.search).get("api");
  if (fromQuery) return fromQuery;
  const meta = document.querySelector<HTMLMetaElement>('meta[name="api-base"]');
  if (meta?.content) return meta.content;
  return "";
}

const container = document.getElementById("app");
if (container) {
  mount(container, new ApiClient(apiBase()), { pollMs: 2000 });
}
