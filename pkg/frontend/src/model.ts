// The view model. Rendered state derives only from gateway data: REST
// snapshots seed it, WebSocket frames mutate it, and nothing in here ever
// invents plant state (no optimistic updates).

import type {
  AlertView, ProcessView, ReservationView, ShotView, StatusCell, Tagged,
  WireFrame,
} from "./types.js";
import { SHOT_PHASES } from "./types.js";

export class ViewModel {
  status = new Map<string, StatusCell>();
  alerts: AlertView[] = [];
  reservations: ReservationView[] = [];
  processes = new Map<string, ProcessView>();
  shot: ShotView = { id: null, phase: "", ordinal: 0, outcome: null };
  connection: "online" | "offline" = "offline";
  eventLagMs = 0;
  reservationsStale = false;

  // -- snapshot seeding (REST) -----------------------------------------

  applyStatusSnapshot(body: Record<string, any>): void {
    for (const [channel, cell] of Object.entries(body)) {
      this.status.set(channel, { channel, ...cell });
    }
  }

  applyAlerts(list: any[]): void {
    this.alerts = list.map(alertFromJson);
  }

  applyReservations(list: any[]): void {
    this.reservations = list as ReservationView[];
    this.reservationsStale = false;
  }

  applyProcesses(list: any[]): void {
    for (const p of list) {
      this.processes.set(p.process_id, p as ProcessView);
    }
  }

  applyActiveShot(record: any | null): void {
    if (!record) return;
    const committed = (record.transcript ?? []).filter((a: any) => a.committed);
    this.shot = {
      id: record.shot_id,
      phase: committed.length ? committed[committed.length - 1].phase : "",
      ordinal: committed.length,
      outcome: record.outcome ? record.outcome.outcome : null,
    };
  }

  // -- event deltas (WebSocket) ------------------------------------------

  applyFrame(frame: WireFrame, nowMs = Date.now()): void {
    if (frame.ts) {
      this.eventLagMs = Math.max(0, nowMs - Date.parse(frame.ts));
    }
    const topic = frame.target;
    if (topic.startsWith("status.")) {
      this.applyStatusFrame(topic.slice("status.".length), frame.args);
    } else if (topic === "alert.raised") {
      this.alerts.push({
        id: num(frame.args.id),
        severity: str(frame.args.severity),
        source: str(frame.args.source),
        text: str(frame.args.text),
        options: JSON.parse(str(frame.args.options)),
        state: "presented",
      });
    } else if (topic === "alert.responded") {
      const id = num(frame.args.id);
      this.alerts = this.alerts.filter((a) => a.id !== id);
    } else if (topic === "svc.state") {
      const pid = str(frame.args.process_id);
      const existing = this.processes.get(pid);
      this.processes.set(pid, {
        process_id: pid,
        state: str(frame.args.new),
        incarnation: num(frame.args.incarnation),
        stats: existing?.stats,
      });
    } else if (topic === "shot.phase") {
      this.shot = {
        id: num(frame.args.shot_id),
        phase: str(frame.args.phase),
        ordinal: num(frame.args.ordinal),
        outcome: null,
      };
    } else if (topic === "shot.outcome") {
      const outcome = JSON.parse(str(frame.args.outcome));
      this.shot = { ...this.shot, id: num(frame.args.shot_id),
                    outcome: outcome.outcome };
    } else if (topic === "reserve.broken") {
      this.reservationsStale = true;
    }
  }

  private applyStatusFrame(channel: string, args: Record<string, Tagged>): void {
    const seq = num(args.seq);
    const prev = this.status.get(channel);
    if (prev && seq <= prev.seq) return; // stale replay
    const tagged = args.value as Tagged;
    this.status.set(channel, {
      channel,
      value: tagged.value,
      tag: tagged.tag,
      seq,
      reason: str(args.reason),
      ts: str(args.ts),
    });
  }

  setConnection(state: "online" | "offline"): void {
    this.connection = state;
  }

  // -- derived views -----------------------------------------------------

  /** Channels grouped facility/beam -> rows, for the tree panel. */
  tree(prefix = ""): Map<string, StatusCell[]> {
    const groups = new Map<string, StatusCell[]>();
    const channels = [...this.status.keys()].sort();
    for (const channel of channels) {
      if (!channel.startsWith(prefix)) continue;
      const parts = channel.split(".");
      const group = parts.slice(0, 2).join(".");
      const cell = this.status.get(channel)!;
      const bucket = groups.get(group);
      if (bucket) bucket.push(cell);
      else groups.set(group, [cell]);
    }
    return groups;
  }

  shotRibbon(): { phase: string; state: "done" | "active" | "pending" }[] {
    return SHOT_PHASES.map((phase, i) => {
      const ordinal = i + 1;
      let state: "done" | "active" | "pending" = "pending";
      if (this.shot.ordinal > ordinal) state = "done";
      else if (this.shot.ordinal === ordinal) state = "active";
      return { phase, state };
    });
  }

  pendingAlertCount(): number {
    return this.alerts.length;
  }
}

function alertFromJson(a: any): AlertView {
  return { id: a.id, severity: a.severity, source: a.source, text: a.text,
           options: a.options, state: a.state };
}

function num(tagged: Tagged | undefined): number {
  return typeof tagged?.value === "number" ? (tagged.value as number) : 0;
}

function str(tagged: Tagged | undefined): string {
  return typeof tagged?.value === "string" ? (tagged.value as string) : "";
}
