// DOM rendering, framework-free. The whole console re-renders from the
// view model on a short throttle; handlers delegate to the controller.

import { ConsoleController } from "./controller.js";
import { ViewModel } from "./model.js";

export class Renderer {
  private root: HTMLElement;
  private controller: ConsoleController;
  private model: ViewModel;
  private pending = false;
  private seqExecId: string | null = null;
  private seqState = "";
  treeFilter = "";

  constructor(root: HTMLElement, controller: ConsoleController) {
    this.root = root;
    this.controller = controller;
    this.model = controller.model;
    controller.onChange = () => this.schedule();
  }

  schedule(): void {
    if (this.pending) return;
    this.pending = true;
    setTimeout(() => {
      this.pending = false;
      this.render();
    }, 50);
  }

  render(): void {
    const m = this.model;
    this.root.innerHTML = `
      <header>
        <h1>facility console</h1>
        <span class="badge ${m.connection}">${m.connection}</span>
        <span class="lag">event lag ${m.eventLagMs} ms</span>
        <span class="badge alerts ${m.pendingAlertCount() ? "hot" : ""}">
          alerts: ${m.pendingAlertCount()}</span>
      </header>
      ${m.connection === "offline" ? '<div class="banner">gateway offline — reconnecting…</div>' : ""}
      <main>
        <section id="processes">${this.processBoard()}</section>
        <section id="shot">${this.shotPanel()}</section>
        <section id="alerts">${this.alertQueue()}</section>
        <section id="reservations">${this.reservationPanel()}</section>
        <section id="sequence">${this.sequencePanel()}</section>
        <section id="tree">${this.statusTree()}</section>
      </main>`;
    this.wire();
  }

  private processBoard(): string {
    const rows = [...this.model.processes.values()]
      .sort((a, b) => a.process_id.localeCompare(b.process_id))
      .map((p) => `<span class="proc ${p.state}" title="incarnation ${p.incarnation}">
                     ${p.process_id}<em>${p.state}</em></span>`)
      .join("");
    return `<h2>processes</h2><div class="board">${rows || "<i>no data</i>"}</div>`;
  }

  private shotPanel(): string {
    const m = this.model;
    const ribbon = m.shotRibbon()
      .map((r) => `<span class="phase ${r.state}">${r.phase}</span>`)
      .join("");
    const label = m.shot.id === null ? "idle"
      : m.shot.outcome ? `shot ${m.shot.id}: ${m.shot.outcome}`
      : `shot ${m.shot.id} in progress`;
    return `<h2>shot</h2>
      <div class="ribbon">${ribbon}</div>
      <div class="shotrow"><span>${label}</span>
        <button id="start-shot">start shot</button>
        <button id="abort-shot" ${m.shot.id === null || m.shot.outcome ? "disabled" : ""}>abort</button>
      </div>`;
  }

  private alertQueue(): string {
    const rows = this.model.alerts.map((a) => {
      const buttons = a.options
        .map((o) => `<button class="respond" data-id="${a.id}" data-choice="${esc(o)}">${esc(o)}</button>`)
        .join("");
      return `<li class="sev-${a.severity}">
        <b>#${a.id}</b> [${a.severity}] ${esc(a.source)} — ${esc(a.text)}
        <span class="options">${buttons}</span></li>`;
    }).join("");
    return `<h2>alert queue</h2><ul class="alerts">${rows || "<i>none pending</i>"}</ul>`;
  }

  private reservationPanel(): string {
    const rows = this.model.reservations.map((r) =>
      `<li>${esc(r.taxon)} <em>held by ${esc(r.holder)}</em></li>`).join("");
    return `<h2>reservations</h2>
      <form id="reserve-form"><input id="reserve-taxon" placeholder="taxon to reserve"/>
        <button>reserve</button></form>
      <ul>${rows || "<i>none held</i>"}</ul>`;
  }

  private sequencePanel(): string {
    return `<h2>sequence</h2>
      <textarea id="seq-xml" rows="4" placeholder="&lt;sequence …&gt;"></textarea>
      <div><button id="run-seq">run</button>
        <span id="seq-state">${esc(this.seqState)}</span></div>`;
  }

  private statusTree(): string {
    const groups = this.model.tree(this.treeFilter);
    const sections = [...groups.entries()].map(([group, cells]) => {
      const rows = cells.map((c) =>
        `<tr><td>${esc(c.channel)}</td><td class="val">${fmt(c.value)}</td>
         <td class="meta">#${c.seq} ${c.reason}</td></tr>`).join("");
      return `<details open><summary>${esc(group)} (${cells.length})</summary>
        <table>${rows}</table></details>`;
    }).join("");
    return `<h2>status tree</h2>
      <input id="tree-filter" placeholder="prefix filter" value="${esc(this.treeFilter)}"/>
      ${sections || "<i>no channels</i>"}`;
  }

  private wire(): void {
    this.root.querySelectorAll<HTMLButtonElement>("button.respond").forEach((b) => {
      b.onclick = () => void this.controller
        .respondAlert(Number(b.dataset.id), b.dataset.choice!)
        .catch((e) => this.note(String(e)));
    });
    const startShot = this.root.querySelector<HTMLButtonElement>("#start-shot");
    if (startShot) startShot.onclick = () =>
      void this.controller.startShot().catch((e) => this.note(String(e)));
    const abortShot = this.root.querySelector<HTMLButtonElement>("#abort-shot");
    if (abortShot) abortShot.onclick = () =>
      void this.controller.abortShot().catch((e) => this.note(String(e)));
    const reserveForm = this.root.querySelector<HTMLFormElement>("#reserve-form");
    if (reserveForm) reserveForm.onsubmit = (ev) => {
      ev.preventDefault();
      const input = this.root.querySelector<HTMLInputElement>("#reserve-taxon")!;
      void this.controller.reserve(input.value).catch((e) => this.note(String(e)));
    };
    const runSeq = this.root.querySelector<HTMLButtonElement>("#run-seq");
    if (runSeq) runSeq.onclick = () => void this.launchSequence();
    const filter = this.root.querySelector<HTMLInputElement>("#tree-filter");
    if (filter) filter.onchange = () => {
      this.treeFilter = filter.value;
      this.render();
    };
  }

  private async launchSequence(): Promise<void> {
    const xml = this.root.querySelector<HTMLTextAreaElement>("#seq-xml")?.value ?? "";
    try {
      const out = await this.controller.runSequence(xml);
      this.seqExecId = out.exec_id;
      this.seqState = `running ${out.exec_id}`;
      void this.pollSequence();
    } catch (e) {
      this.note(String(e));
    }
  }

  // Select prompts surface through the alert queue; this poll just keeps
  // the run-state label fresh.
  private async pollSequence(): Promise<void> {
    while (this.seqExecId) {
      const status = await this.controller.sequenceStatus(this.seqExecId);
      if (!status.running) {
        this.seqState = `${this.seqExecId}: ${status.outcome?.outcome ?? "?"}`;
        this.seqExecId = null;
        this.schedule();
        return;
      }
      this.seqState = status.paused_on
        ? `${this.seqExecId}: waiting on alert #${status.paused_on}`
        : `${this.seqExecId}: running`;
      this.schedule();
      await sleep(500);
    }
  }

  private note(text: string): void {
    this.seqState = text;
    this.schedule();
  }
}

function esc(text: string): string {
  return text.replace(/[&<>"]/g, (c) =>
    ({ "&": "&amp;", "<": "&lt;", ">": "&gt;", '"': "&quot;" }[c]!));
}

function fmt(value: unknown): string {
  if (typeof value === "number") return Number.isInteger(value) ? String(value) : value.toFixed(3);
  if (Array.isArray(value)) return `[${value.length} samples]`;
  return esc(String(value));
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
