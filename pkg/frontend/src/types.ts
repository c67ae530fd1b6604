// Wire shapes from the gateway. Event frames mirror bus frames: tagged
// attribute maps under args, topic in target.

export interface Tagged {
  tag: string;
  value: unknown;
}

export interface WireFrame {
  v: number;
  kind: string;
  target: string;
  op: string;
  args: Record<string, Tagged>;
  ts?: string;
  id?: string;
}

export interface StatusCell {
  channel: string;
  value: unknown;
  tag: string;
  seq: number;
  reason: string;
  ts: string;
}

export interface AlertView {
  id: number;
  severity: string;
  source: string;
  text: string;
  options: string[];
  state: string;
}

export interface ReservationView {
  taxon: string;
  holder: string;
  acquired_at: number;
  group_id: string | null;
  lease_ms: number | null;
}

export interface ProcessView {
  process_id: string;
  state: string;
  incarnation: number;
  stats?: Record<string, unknown>;
}

export interface ShotView {
  id: number | null;
  phase: string;
  ordinal: number; // 0 = idle, 1..9 committed phases
  outcome: string | null;
}

export const SHOT_PHASES = [
  "setup", "participant_check", "prepare", "verify", "arm",
  "countdown", "fire", "postshot", "analyze",
] as const;
