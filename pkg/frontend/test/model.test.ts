import { describe, expect, it } from "vitest";

import { ViewModel } from "../src/model.js";
import { SHOT_PHASES } from "../src/types.js";
import { evt, statusEvt } from "./fakes.js";

describe("view model", () => {
  it("applies status frames and ignores stale seq", () => {
    const m = new ViewModel();
    m.applyFrame(statusEvt("nif.b001.align.m001.position", 4.5, 7));
    expect(m.status.get("nif.b001.align.m001.position")!.value).toBe(4.5);
    m.applyFrame(statusEvt("nif.b001.align.m001.position", 1.0, 6)); // stale
    expect(m.status.get("nif.b001.align.m001.position")!.value).toBe(4.5);
    m.applyFrame(statusEvt("nif.b001.align.m001.position", 9.25, 8));
    expect(m.status.get("nif.b001.align.m001.position")!.value).toBe(9.25);
  });

  it("groups the tree by facility.beam", () => {
    const m = new ViewModel();
    m.applyFrame(statusEvt("nif.b001.align.m001.position", 1, 1));
    m.applyFrame(statusEvt("nif.b001.power.ps001.output_v", 2, 1));
    m.applyFrame(statusEvt("nif.b002.align.m001.position", 3, 1));
    const tree = m.tree();
    expect([...tree.keys()]).toEqual(["nif.b001", "nif.b002"]);
    expect(tree.get("nif.b001")!.length).toBe(2);
    expect(m.tree("nif.b002").size).toBe(1);
  });

  it("alert raised/responded drives the queue and badge count", () => {
    const m = new ViewModel();
    m.applyFrame(evt("alert.raised", { id: 4, severity: "warning",
                                       source: "nif.b001.align.m001",
                                       text: "check", options: '["go","halt"]' }));
    expect(m.pendingAlertCount()).toBe(1);
    expect(m.alerts[0].options).toEqual(["go", "halt"]);
    m.applyFrame(evt("alert.responded", { id: 4, choice: "go", operator: "op" }));
    expect(m.pendingAlertCount()).toBe(0);
  });

  it("alert buttons always equal the options list, fuzzed", () => {
    const m = new ViewModel();
    let nextId = 1;
    for (let i = 0; i < 100; i++) {
      const n = 1 + (i * 7) % 5;
      const options = Array.from({ length: n }, (_, k) => `opt-${i}-${k}`);
      const id = nextId++;
      m.applyFrame(evt("alert.raised", { id, severity: "info", source: "s",
                                         text: `t${i}`,
                                         options: JSON.stringify(options) }));
      const shown = m.alerts.find((a) => a.id === id)!;
      expect(shown.options).toEqual(options);
    }
    expect(m.pendingAlertCount()).toBe(100);
  });

  it("shot ribbon walks the nine phases in order", () => {
    const m = new ViewModel();
    expect(m.shotRibbon().every((r) => r.state === "pending")).toBe(true);
    SHOT_PHASES.forEach((phase, i) => {
      m.applyFrame(evt("shot.phase", { shot_id: 3, phase, ordinal: i + 1 }));
      const ribbon = m.shotRibbon();
      expect(ribbon[i].state).toBe("active");
      expect(ribbon.slice(0, i).every((r) => r.state === "done")).toBe(true);
      expect(ribbon.slice(i + 1).every((r) => r.state === "pending")).toBe(true);
    });
    m.applyFrame(evt("shot.outcome", { shot_id: 3,
                                       outcome: '{"outcome":"completed"}' }));
    expect(m.shot.outcome).toBe("completed");
  });

  it("svc.state flips the process badge immediately", () => {
    const m = new ViewModel();
    m.applyProcesses([{ process_id: "fep-motion-01", state: "up", incarnation: 1 }]);
    const before = Date.now();
    m.applyFrame(evt("svc.state", { process_id: "fep-motion-01", old: "up",
                                    new: "dead", incarnation: 1 }));
    const elapsed = Date.now() - before;
    expect(m.processes.get("fep-motion-01")!.state).toBe("dead");
    expect(elapsed).toBeLessThan(2 * 1000); // two heartbeat intervals of budget
    m.applyFrame(evt("svc.state", { process_id: "fep-motion-01",
                                    old: "dead", new: "starting",
                                    incarnation: 2 }));
    expect(m.processes.get("fep-motion-01")!.incarnation).toBe(2);
  });

  it("event lag derives from frame timestamps", () => {
    const m = new ViewModel();
    const now = Date.parse("2026-01-01T00:00:01.250Z");
    m.applyFrame(statusEvt("nif.b001.diag.sn001.value", 1.0, 1), now);
    expect(m.eventLagMs).toBe(1250);
  });

  it("reserve.broken marks the reservation panel stale", () => {
    const m = new ViewModel();
    m.applyReservations([{ taxon: "nif.t.x", holder: "me", acquired_at: 0,
                           group_id: null, lease_ms: null }]);
    expect(m.reservationsStale).toBe(false);
    m.applyFrame(evt("reserve.broken", { taxon: "nif.t.x", holder: "me",
                                         admin: "boss", reason: "override" }));
    expect(m.reservationsStale).toBe(true);
  });
});
