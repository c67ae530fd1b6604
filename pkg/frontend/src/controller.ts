// Glue between the gateway and the view model. Every user action is a
// plain POST; the view changes only when the gateway's event stream (or
// a full resync) says the plant actually changed.

import { GatewayClient } from "./gateway.js";
import { ViewModel } from "./model.js";
import type { EventsHandle } from "./gateway.js";
import type { WireFrame } from "./types.js";

export class ConsoleController {
  gateway: GatewayClient;
  model: ViewModel;
  onChange: (() => void) | null = null;
  private handle: EventsHandle | null = null;

  constructor(gateway: GatewayClient, model: ViewModel) {
    this.gateway = gateway;
    this.model = model;
  }

  start(): void {
    this.handle = this.gateway.events(
      (frame: WireFrame) => {
        this.model.applyFrame(frame);
        if (this.model.reservationsStale) {
          void this.refreshReservations();
        }
        this.changed();
      },
      (state) => {
        this.model.setConnection(state);
        if (state === "online") {
          void this.resync();
        }
        this.changed();
      },
    );
  }

  stop(): void {
    this.handle?.stop();
  }

  /** Full REST snapshot; runs at every (re)connect so a dropped socket
   * can never leave stale state behind. */
  async resync(): Promise<void> {
    const [status, alerts, reservations, active] = await Promise.all([
      this.gateway.status(),
      this.gateway.alerts(),
      this.gateway.reservations(),
      this.gateway.activeShot(),
    ]);
    this.model.applyStatusSnapshot(status);
    this.model.applyAlerts(alerts);
    this.model.applyReservations(reservations);
    this.model.applyActiveShot(active.shot);
    try {
      this.model.applyProcesses(await this.gateway.processes());
    } catch {
      // sysmgr may be down; the board just stays grey
    }
    this.changed();
  }

  private async refreshReservations(): Promise<void> {
    this.model.applyReservations(await this.gateway.reservations());
    this.changed();
  }

  private changed(): void {
    this.onChange?.();
  }

  // -- operator actions: fire-and-await, zero optimistic mutation ---------

  respondAlert(id: number, choice: string): Promise<unknown> {
    return this.gateway.respondAlert(id, choice);
  }

  async reserve(taxon: string): Promise<string> {
    const out = await this.gateway.reserve(taxon);
    await this.refreshReservations();
    return out.key;
  }

  async release(key: string, taxon?: string): Promise<void> {
    await this.gateway.release(key, taxon);
    await this.refreshReservations();
  }

  startShot(): Promise<{ shot_id: number }> {
    return this.gateway.startShot({ dwell_ms: 250 });
  }

  abortShot(): Promise<unknown> {
    const id = this.model.shot.id;
    if (id === null) return Promise.reject(new Error("no active shot"));
    return this.gateway.abortShot(id);
  }

  runSequence(xml: string): Promise<{ exec_id: string }> {
    return this.gateway.runSequence(xml);
  }

  sequenceStatus(execId: string): Promise<any> {
    return this.gateway.sequenceStatus(execId);
  }

  sequenceResume(execId: string, choice: string): Promise<unknown> {
    return this.gateway.sequenceResume(execId, choice);
  }
}
