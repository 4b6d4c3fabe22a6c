/**
 * The operator console: now-playing panel, receiver-state panel, behaviour
 * editor, and event-log tail, all fed by polling the receiver server.
 *
 * Every mutation travels through POST /dabml; /state and /events are
 * read-only polls. A failed poll marks the affected panels stale and the
 * poll loop backs off until the server answers again.
 */

import { ServerClient } from "./client.js";
import {
  Action,
  BehaviourSpec,
  behaviours,
  contentQuery,
  hardwareControl,
  listBehavioursQuery,
  validateAction,
  validateBehaviour,
} from "./envelopes.js";
import { attrsOfAll, blockOf, textOf } from "./xmllite.js";

export interface NowPlaying {
  artiste: string | null;
  songTitle: string | null;
  genre: string | null;
  fetchedAt: number;
}

export interface DataInfo {
  contentKind: string | null;
  name: string | null;
  uri: string | null;
  fetchedAt: number;
}

export interface StateSnapshot {
  ensembleLabel: string;
  selectedSubchannel: string;
  volume: string;
  afcOffset: string;
  audioMuted: string;
  recording: Record<string, string> | null;
  fetchedAt: number;
}

export interface ConsoleOptions {
  pollIntervalMs?: number;
  eventTailLines?: number;
}

const MIN_POLL_INTERVAL_MS = 250;
const BACKOFF_CAP_FACTOR = 8;

export class ConsoleApp {
  readonly client: ServerClient;
  readonly pollIntervalMs: number;
  readonly eventTailLines: number;

  lastNowPlaying: NowPlaying | null = null;
  lastDataInfo: DataInfo | null = null;
  lastState: StateSnapshot | null = null;
  eventTail: string[] = [];
  behaviourList: string[] = [];
  stale = false;

  private root: HTMLElement;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private currentDelay: number;
  private polling = false;

  constructor(root: HTMLElement, client: ServerClient, options: ConsoleOptions = {}) {
    this.root = root;
    this.client = client;
    this.pollIntervalMs = Math.max(options.pollIntervalMs ?? 1000, MIN_POLL_INTERVAL_MS);
    this.eventTailLines = options.eventTailLines ?? 12;
    this.currentDelay = this.pollIntervalMs;
    this.render();
    this.wireForms();
  }

  start(): void {
    if (this.timer !== null) {
      return;
    }
    void this.syncBehaviours();
    const loop = async () => {
      await this.pollOnce();
      this.timer = setTimeout(loop, this.currentDelay);
    };
    this.timer = setTimeout(loop, 0);
  }

  stop(): void {
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
  }

  /** One poll round: content queries, state, events. */
  async pollOnce(): Promise<void> {
    if (this.polling) {
      return; // at most one in-flight round
    }
    this.polling = true;
    try {
      const now = Date.now();
      const audioReply = await this.client.postDabml(contentQuery("audio"));
      const audio = blockOf(audioReply.raw, "audioContent");
      if (audio) {
        this.lastNowPlaying = {
          artiste: textOf(audio, "artiste"),
          songTitle: textOf(audio, "songTitle"),
          genre: textOf(audio, "genre"),
          fetchedAt: now,
        };
      }
      const dataReply = await this.client.postDabml(contentQuery("data"));
      const data = blockOf(dataReply.raw, "dataContent");
      if (data) {
        this.lastDataInfo = {
          contentKind: textOf(data, "contentKind"),
          name: textOf(data, "name"),
          uri: textOf(data, "uri"),
          fetchedAt: now,
        };
      }
      const stateXml = await this.client.getState();
      this.lastState = {
        ensembleLabel: textOf(stateXml, "ensembleLabel") ?? "?",
        selectedSubchannel: textOf(stateXml, "selectedSubchannel") ?? "?",
        volume: textOf(stateXml, "volume") ?? "?",
        afcOffset: textOf(stateXml, "afcOffset") ?? "?",
        audioMuted: textOf(stateXml, "audioMuted") ?? "?",
        recording: attrsOfAll(stateXml, "recording")[0] ?? null,
        fetchedAt: now,
      };
      const events = await this.client.getEvents();
      this.eventTail = events.split("\n").filter((l) => l).slice(-this.eventTailLines);
      this.stale = false;
      this.currentDelay = this.pollIntervalMs;
    } catch {
      this.stale = true;
      this.currentDelay = Math.min(
        this.currentDelay * 2,
        this.pollIntervalMs * BACKOFF_CAP_FACTOR,
      );
    } finally {
      this.polling = false;
      this.renderPanels();
    }
  }

  /** Validate locally, post on success, refresh the state panel. */
  async sendHardwareControl(action: Action): Promise<string | null> {
    const problem = validateAction(action);
    if (problem) {
      this.showFormError("control-error", problem);
      return problem;
    }
    this.showFormError("control-error", "");
    try {
      const reply = await this.client.postDabml(hardwareControl([action]));
      this.toast(reply.status === "ok" ? `ok: ${reply.detail}` : `error: ${reply.detail}`);
      await this.refreshState();
      return reply.status === "ok" ? null : reply.detail;
    } catch (err) {
      this.toast(`connection error: ${String(err)}`);
      return String(err);
    }
  }

  /** Validate locally, post, and list the behaviour once acknowledged. */
  async programBehaviour(spec: BehaviourSpec): Promise<string | null> {
    const problem = validateBehaviour(spec);
    if (problem) {
      this.showFormError("behaviour-error", problem);
      return problem;
    }
    this.showFormError("behaviour-error", "");
    try {
      const reply = await this.client.postDabml(behaviours([spec]));
      if (reply.status === "ok") {
        this.toast(`ok: ${reply.detail}`);
        if (!this.behaviourList.includes(spec.id)) {
          this.behaviourList.push(spec.id);
        }
        this.renderPanels();
        return null;
      }
      this.showFormError("behaviour-error", reply.detail);
      this.toast(`error: ${reply.detail}`);
      return reply.detail;
    } catch (err) {
      this.toast(`connection error: ${String(err)}`);
      return String(err);
    }
  }

  async refreshState(): Promise<void> {
    try {
      const stateXml = await this.client.getState();
      this.lastState = {
        ensembleLabel: textOf(stateXml, "ensembleLabel") ?? "?",
        selectedSubchannel: textOf(stateXml, "selectedSubchannel") ?? "?",
        volume: textOf(stateXml, "volume") ?? "?",
        afcOffset: textOf(stateXml, "afcOffset") ?? "?",
        audioMuted: textOf(stateXml, "audioMuted") ?? "?",
        recording: attrsOfAll(stateXml, "recording")[0] ?? null,
        fetchedAt: Date.now(),
      };
    } catch {
      this.stale = true;
    }
    this.renderPanels();
  }

  private async syncBehaviours(): Promise<void> {
    try {
      const reply = await this.client.postDabml(listBehavioursQuery());
      this.behaviourList = attrsOfAll(reply.raw, "behaviour")
        .map((attrs) => attrs["id"] ?? "")
        .filter((id) => id.length > 0);
      this.renderPanels();
    } catch {
      // first poll will mark things stale
    }
  }

  // --- DOM ---

  private panel(id: string): HTMLElement {
    const el = this.root.querySelector<HTMLElement>(`#${id}`);
    if (!el) {
      throw new Error(`panel #${id} missing`);
    }
    return el;
  }

  private render(): void {
    this.root.innerHTML = `
      <header><h1>DAB receiver console</h1><span id="server-url">${this.client.baseUrl}</span></header>
      <main>
        <section class="panel" id="now-playing-panel">
          <h2>Now playing</h2>
          <div id="now-playing">no content yet</div>
          <div id="data-content">no data content yet</div>
          <div class="meta" id="content-fetched"></div>
        </section>
        <section class="panel" id="state-panel">
          <h2>Receiver state</h2>
          <div id="receiver-state">no state yet</div>
          <div class="meta" id="state-fetched"></div>
          <h2>Hardware control</h2>
          <form id="control-form">
            <label>Volume <input id="volume-input" name="volume" type="number" value="50" /></label>
            <button id="volume-send" type="button" data-action="volume">Set volume</button>
            <label>Subchannel <input id="subchannel-input" name="subchannel" type="number" value="1" /></label>
            <button id="subchannel-send" type="button" data-action="subchannel">Select</button>
            <span class="error" id="control-error"></span>
          </form>
        </section>
        <section class="panel" id="behaviour-panel">
          <h2>Behaviours</h2>
          <ul id="behaviour-list"></ul>
          <form id="behaviour-form">
            <label>Id <input id="behaviour-id" value="" /></label>
            <label>Field <input id="trigger-field" value="audioContent.artiste" /></label>
            <label>Match
              <select id="trigger-match">
                <option value="equals">equals</option>
                <option value="contains">contains</option>
              </select>
            </label>
            <label>Value <input id="trigger-value" value="" /></label>
            <label>Set volume to <input id="reaction-volume" type="number" value="80" /></label>
            <label>Save as <input id="reaction-save" value="" placeholder="optional" /></label>
            <button id="behaviour-send" type="button">Program behaviour</button>
            <span class="error" id="behaviour-error"></span>
          </form>
        </section>
        <section class="panel" id="events-panel">
          <h2>Event log</h2>
          <pre id="event-log"></pre>
        </section>
      </main>
      <div id="toast"></div>`;
  }

  private wireForms(): void {
    this.panel("volume-send").addEventListener("click", () => {
      const level = Number((this.panel("volume-input") as HTMLInputElement).value);
      void this.sendHardwareControl({ kind: "setVolume", level });
    });
    this.panel("subchannel-send").addEventListener("click", () => {
      const id = Number((this.panel("subchannel-input") as HTMLInputElement).value);
      void this.sendHardwareControl({ kind: "selectSubchannel", id });
    });
    this.panel("behaviour-send").addEventListener("click", () => {
      const value = (id: string) => (this.panel(id) as HTMLInputElement).value;
      const spec: BehaviourSpec = {
        id: value("behaviour-id"),
        trigger: [
          {
            field: value("trigger-field"),
            match: value("trigger-match") as "equals" | "contains",
            value: value("trigger-value"),
          },
        ],
        reactions: [
          { kind: "device", action: { kind: "setVolume", level: Number(value("reaction-volume")) } },
        ],
      };
      const save = value("reaction-save");
      if (save) {
        spec.reactions.push({ kind: "saveToDisk", destination: save });
      }
      void this.programBehaviour(spec);
    });
  }

  private renderPanels(): void {
    const nowPlaying = this.panel("now-playing");
    if (this.lastNowPlaying) {
      const np = this.lastNowPlaying;
      const title = [np.artiste, np.songTitle].filter((p) => p).join(" — ");
      nowPlaying.textContent = title || "no content yet";
      if (np.genre) {
        nowPlaying.textContent += ` (${np.genre})`;
      }
    } else {
      nowPlaying.textContent = "no content yet";
    }
    const dataPanel = this.panel("data-content");
    if (this.lastDataInfo) {
      const d = this.lastDataInfo;
      dataPanel.textContent = `${d.contentKind ?? "?"}: ${d.name ?? "?"}${d.uri ? ` @ ${d.uri}` : ""}`;
    } else {
      dataPanel.textContent = "no data content yet";
    }
    const fetched = this.lastNowPlaying?.fetchedAt ?? this.lastDataInfo?.fetchedAt;
    this.panel("content-fetched").textContent = fetched
      ? `fetched ${new Date(fetched).toISOString()}${this.stale ? " (stale)" : ""}`
      : "";

    const statePanel = this.panel("receiver-state");
    if (this.lastState) {
      const s = this.lastState;
      const recording = s.recording
        ? `recording sub ${s.recording["subchannel"]} -> ${s.recording["destination"]}`
        : "not recording";
      statePanel.textContent =
        `ensemble ${s.ensembleLabel} | subchannel ${s.selectedSubchannel} | ` +
        `volume ${s.volume}${s.audioMuted === "true" ? " (muted)" : ""} | ` +
        `AFC ${s.afcOffset} | ${recording}`;
      this.panel("state-fetched").textContent =
        `fetched ${new Date(s.fetchedAt).toISOString()}${this.stale ? " (stale)" : ""}`;
    }
    for (const panelId of ["now-playing-panel", "state-panel", "events-panel"]) {
      this.panel(panelId).classList.toggle("stale", this.stale);
    }

    const list = this.panel("behaviour-list");
    list.innerHTML = this.behaviourList.map((id) => `<li>${id}</li>`).join("");
    this.panel("event-log").textContent = this.eventTail.join("\n");
  }

  private showFormError(id: string, message: string): void {
    this.panel(id).textContent = message;
  }

  private toast(message: string): void {
    this.panel("toast").textContent = message;
  }
}
