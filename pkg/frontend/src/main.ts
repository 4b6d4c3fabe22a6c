import { ServerClient } from "./client.js";
import { ConsoleApp } from "./console.js";

const params = new URLSearchParams(window.location.search);
const server = params.get("server") ?? "http://127.0.0.1:8321";
const poll = Number(params.get("poll") ?? "1000");

const root = document.getElementById("app");
if (!root) {
  throw new Error("#app element missing");
}
const app = new ConsoleApp(root, new ServerClient(server), { pollIntervalMs: poll });
app.start();
