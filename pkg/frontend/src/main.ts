import { LabelServiceClient } from "./api.js";
import { SessionController } from "./session.js";
import { LabelView } from "./ui.js";

function sessionId(): string {
  const fromUrl = new URLSearchParams(window.location.search).get("session");
  if (fromUrl) return fromUrl;
  const stored = sessionStorage.getItem("label-session");
  if (stored) return stored;
  const fresh = `web-${Math.random().toString(36).slice(2, 10)}`;
  sessionStorage.setItem("label-session", fresh);
  return fresh;
}

const client = new LabelServiceClient(window.location.origin);
const controller = new SessionController(client, sessionId());
const view = new LabelView(document.getElementById("app")!, controller);
void view.run();
