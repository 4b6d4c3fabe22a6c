// Dependency-free static file server for the console page.
// Usage: node serve.js [port]   (default 8080)
import { createServer } from "node:http";
import { readFile } from "node:fs/promises";
import { extname, join, normalize } from "node:path";
import { fileURLToPath } from "node:url";

const root = fileURLToPath(new URL(".", import.meta.url));
const port = Number(process.argv[2] ?? process.env.PORT ?? 8080);

const types = {
  ".html": "text/html",
  ".js": "text/javascript",
  ".map": "application/json",
  ".css": "text/css",
};

createServer(async (req, res) => {
  const rawPath = (req.url ?? "/").split("?")[0];
  const path = rawPath === "/" ? "/index.html" : rawPath;
  const file = normalize(join(root, path));
  if (!file.startsWith(root)) {
    res.writeHead(403).end();
    return;
  }
  try {
    const body = await readFile(file);
    res.writeHead(200, { "content-type": types[extname(file)] ?? "application/octet-stream" });
    res.end(body);
  } catch {
    res.writeHead(404).end("not found");
  }
}).listen(port, () => {
  console.log(`console at http://127.0.0.1:${port}/ (append ?server=http://HOST:PORT to point elsewhere)`);
});
