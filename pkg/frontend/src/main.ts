import { ApiClient } from "./client.js";
import { SessionApp } from "./app.js";

const params = new URLSearchParams(location.search);
const server = params.get("server") ?? "http://127.0.0.1:8742";
const client = new ApiClient(server);

async function boot(): Promise<void> {
  const root = document.getElementById("app")!;
  let sessionId = params.get("session");
  if (!sessionId) {
    const scenario = params.get("scenario") ?? "pnp10";
    const view = await client.createSession(scenario);
    sessionId = view.id;
    const url = new URL(location.href);
    url.searchParams.set("session", sessionId);
    history.replaceState(null, "", url);
  }
  const app = new SessionApp(client, sessionId, root as HTMLElement);
  await app.startUp();
}

boot().catch((err) => {
  const root = document.getElementById("app");
  if (root) root.textContent = `failed to start: ${err}`;
});
