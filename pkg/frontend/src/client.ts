/** Thin fetch wrapper for the receiver server's three endpoints. */

import { textOf } from "./xmllite.js";

export interface DabmlReply {
  status: string;
  detail: string;
  errorKind: string | null;
  behaviourIds: string[];
  raw: string;
}

export class ServerClient {
  readonly baseUrl: string;
  /** Counts every POST /dabml; the console mutates through nothing else. */
  postsSent = 0;

  constructor(baseUrl: string) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  async postDabml(envelopeXml: string): Promise<DabmlReply> {
    this.postsSent += 1;
    const response = await fetch(`${this.baseUrl}/dabml`, {
      method: "POST",
      headers: { "content-type": "text/xml" },
      body: envelopeXml,
    });
    const raw = await response.text();
    return {
      status: textOf(raw, "status") ?? "?",
      detail: textOf(raw, "detail") ?? "",
      errorKind: textOf(raw, "kind"),
      behaviourIds: (textOf(raw, "behaviourIds") ?? "").split(",").filter((s) => s.length > 0),
      raw,
    };
  }

  async getState(): Promise<string> {
    const response = await fetch(`${this.baseUrl}/state`);
    return response.text();
  }

  async getEvents(): Promise<string> {
    const response = await fetch(`${this.baseUrl}/events`);
    return response.text();
  }
}
