// DOM layer: renders the current query as clickable cards, keeps a live
// scatter of the embedding projection, and shows progress. Candidate order
// always matches the API payload; the submitted winner index is the card's
// 1-based payload position.

import { Snapshot } from "./api.js";
import { ControllerEvent, SessionController } from "./controller.js";

export class QueryView {
  private root: HTMLElement;
  private status: HTMLElement;
  private banner: HTMLElement;
  private cards: HTMLElement;

  constructor(container: HTMLElement, private controller: SessionController) {
    container.innerHTML = `
      <div class="status"></div>
      <div class="banner" hidden></div>
      <div class="cards"></div>
    `;
    this.root = container;
    this.status = container.querySelector(".status") as HTMLElement;
    this.banner = container.querySelector(".banner") as HTMLElement;
    this.cards = container.querySelector(".cards") as HTMLElement;
    controller.onChange((e) => this.render(e));
  }

  private render(e: ControllerEvent): void {
    this.banner.hidden = e.error === null;
    if (e.error !== null) {
      this.banner.textContent = `${e.error} — click a card to retry`;
    }
    if (e.phase === "done") {
      this.status.textContent = "Session complete. Thank you!";
      this.cards.innerHTML = "";
      return;
    }
    if (e.phase === "loading" || e.phase === "submitting") {
      this.status.textContent = e.phase === "loading" ? "Fetching query…" : "Recording…";
      return;
    }
    const current = e.current;
    if (!current?.query) return;
    const { reference, candidates } = current.query;
    this.status.textContent =
      `Query ${current.queries_answered + 1} (${current.phase}) — ` +
      `which is most similar to “${reference.name}”?`;
    this.cards.innerHTML = "";
    const refCard = document.createElement("div");
    refCard.className = "card reference";
    refCard.textContent = reference.name;
    this.cards.appendChild(refCard);
    candidates.forEach((candidate, i) => {
      const card = document.createElement("button");
      card.className = "card candidate";
      card.textContent = candidate.name;
      card.dataset.position = String(i + 1);
      card.addEventListener("click", () => {
        void this.controller.choose(i + 1).then((ok) => {
          if (ok) void this.controller.loadNext();
        });
      });
      this.cards.appendChild(card);
    });
  }
}

export class SnapshotView {
  private canvas: HTMLCanvasElement;
  private progress: HTMLElement;

  constructor(container: HTMLElement) {
    container.innerHTML = `
      <canvas width="420" height="420"></canvas>
      <div class="progress"></div>
    `;
    this.canvas = container.querySelector("canvas") as HTMLCanvasElement;
    this.progress = container.querySelector(".progress") as HTMLElement;
  }

  render(snapshot: Snapshot): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    const { width, height } = this.canvas;
    ctx.clearRect(0, 0, width, height);
    const points = snapshot.projection;
    if (points.length) {
      const xs = points.map((p) => p[0]);
      const ys = points.map((p) => p[1]);
      const xMin = Math.min(...xs);
      const xMax = Math.max(...xs);
      const yMin = Math.min(...ys);
      const yMax = Math.max(...ys);
      const pad = 24;
      const sx = (x: number) =>
        pad + ((x - xMin) / Math.max(xMax - xMin, 1e-9)) * (width - 2 * pad);
      const sy = (y: number) =>
        height - pad - ((y - yMin) / Math.max(yMax - yMin, 1e-9)) * (height - 2 * pad);
      ctx.fillStyle = "#2563eb";
      ctx.font = "10px sans-serif";
      points.forEach((p, i) => {
        ctx.beginPath();
        ctx.arc(sx(p[0]), sy(p[1]), 4, 0, 2 * Math.PI);
        ctx.fill();
        ctx.fillText(snapshot.names[i] ?? String(i), sx(p[0]) + 6, sy(p[1]) + 3);
      });
    }
    const loss = snapshot.metrics["log_loss"] ?? [];
    const last = loss.length ? loss[loss.length - 1].toFixed(3) : "–";
    this.progress.textContent =
      `answered ${snapshot.queries_answered} · cycle ${snapshot.cycle} · fit log-loss ${last}`;
  }
}
