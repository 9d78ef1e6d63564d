// Dashboard page wiring: a scrollable card grid polling the server every
// 100 ms with the visible viewport, plus lens/k/policy/refresh controls.

import { ApiClient, ApiError, type DashboardInfo, type ReadResponse } from "./api.js";
import { sparklineBars, toCard } from "./cards.js";
import { PollLoop } from "./poll.js";
import { visibleNodes, type GridGeometry } from "./viewport.js";

const POLL_INTERVAL_MS = 100;
const ROW_HEIGHT_PX = 132;

const LENS_CHOICES: Array<{ label: string; lens: string; usesK: boolean }> = [
  { label: "gcpb — freshest, may grey out", lens: "gcpb", usesK: false },
  { label: "gcnb — committed only, never greys", lens: "gcnb", usesK: false },
  { label: "lcnb — viewport-consistent, never greys", lens: "lcnb", usesK: false },
  { label: "lcmb — monotonic, minimal greying", lens: "lcmb", usesK: false },
  { label: "icnb — per-view newest result", lens: "icnb", usesK: false },
  { label: "k-gcnb — committed unless ≤ k pending", lens: "k-gcnb", usesK: true },
  { label: "k-lcnb — at most k grey in viewport", lens: "k-lcnb", usesK: true },
  { label: "k-lcmb — monotonic, at most k grey", lens: "k-lcmb", usesK: true },
];

class DashboardApp {
  private readonly api = new ApiClient("");
  private info!: DashboardInfo;
  private cardsById = new Map<string, HTMLElement>();
  private loop: PollLoop | null = null;

  private grid!: HTMLElement;
  private scroller!: HTMLElement;
  private banner!: HTMLElement;
  private configError!: HTMLElement;
  private metricsPanel!: HTMLElement;
  private lensSelect!: HTMLSelectElement;
  private kSlider!: HTMLInputElement;
  private kLabel!: HTMLElement;
  private policySelect!: HTMLSelectElement;
  private periodicToggle!: HTMLInputElement;
  private periodicInterval!: HTMLInputElement;

  async start(): Promise<void> {
    this.bindDom();
    this.info = await this.api.dashboard();
    this.syncControls();
    this.renderGrid();
    this.loop = new PollLoop(
      {
        intervalMs: POLL_INTERVAL_MS,
        onError: (err, retryMs) => this.showBanner(err, retryMs),
        onRecover: () => this.hideBanner(),
      },
      () => this.pollOnce(),
    );
    this.loop.start();
  }

  private bindDom(): void {
    const byId = (id: string) => {
      const el = document.getElementById(id);
      if (!el) throw new Error(`missing #${id}`);
      return el;
    };
    this.grid = byId("grid");
    this.scroller = byId("scroller");
    this.banner = byId("banner");
    this.configError = byId("config-error");
    this.metricsPanel = byId("metrics");
    this.lensSelect = byId("lens") as HTMLSelectElement;
    this.kSlider = byId("k") as HTMLInputElement;
    this.kLabel = byId("k-label");
    this.policySelect = byId("policy") as HTMLSelectElement;
    this.periodicToggle = byId("periodic") as HTMLInputElement;
    this.periodicInterval = byId("periodic-ms") as HTMLInputElement;

    for (const choice of LENS_CHOICES) {
      const option = document.createElement("option");
      option.value = choice.lens;
      option.textContent = choice.label;
      this.lensSelect.appendChild(option);
    }
    this.lensSelect.addEventListener("change", () => void this.applyConfig());
    this.kSlider.addEventListener("input", () => {
      this.kLabel.textContent = this.kSlider.value;
    });
    this.kSlider.addEventListener("change", () => void this.applyConfig());
    this.policySelect.addEventListener("change", () => void this.applyConfig());
    this.periodicToggle.addEventListener("change", () => void this.applyPeriodic());
    this.periodicInterval.addEventListener("change", () => void this.applyPeriodic());
    byId("refresh").addEventListener("click", () => void this.triggerRefresh());
  }

  private syncControls(): void {
    const config = this.info.config;
    this.lensSelect.value = config.lens;
    this.kSlider.max = String(this.info.layout.length);
    this.kSlider.value = String(config.k);
    this.kLabel.textContent = String(config.k);
    this.policySelect.value = config.policy;
    this.periodicToggle.checked = config.periodic_interval_ms != null;
    if (config.periodic_interval_ms != null) {
      this.periodicInterval.value = String(config.periodic_interval_ms);
    }
  }

  private renderGrid(): void {
    this.grid.innerHTML = "";
    this.grid.style.gridTemplateColumns = `repeat(${this.info.per_row}, 1fr)`;
    for (const id of this.info.layout) {
      const card = document.createElement("div");
      card.className = "card fresh";
      card.dataset.node = id;
      card.innerHTML = `
        <div class="card-head">
          <span class="card-title">${id}</span>
          <span class="badge"></span>
          <span class="version"></span>
        </div>
        <div class="spark"></div>
        <div class="payload"></div>
        <div class="overlay"><div class="spinner"></div><span>updating</span></div>
      `;
      this.grid.appendChild(card);
      this.cardsById.set(id, card);
    }
  }

  private geometry(): GridGeometry {
    return {
      rowHeightPx: ROW_HEIGHT_PX,
      perRow: this.info.per_row,
      totalCards: this.info.layout.length,
    };
  }

  private currentViewport(): string[] {
    // Computed at poll time, so scrolling updates the reported viewport
    // before the next request fires.
    const nodes = visibleNodes(
      this.info.layout,
      this.scroller.scrollTop,
      this.scroller.clientHeight,
      this.geometry(),
    );
    return nodes.length ? nodes : this.info.layout.slice(0, this.info.per_row);
  }

  private async pollOnce(): Promise<void> {
    const response = await this.api.read(this.currentViewport());
    this.applyRead(response);
  }

  private applyRead(response: ReadResponse): void {
    for (const state of response.states) {
      const el = this.cardsById.get(state.id);
      if (!el) continue;
      const card = toCard(state);
      el.className = `card ${card.display}`;
      (el.querySelector(".version") as HTMLElement).textContent = card.versionLabel;
      (el.querySelector(".badge") as HTMLElement).textContent =
        card.display === "stale" ? "stale" : "";
      (el.querySelector(".payload") as HTMLElement).textContent = card.payload ?? "";
      this.renderSparkline(
        el.querySelector(".spark") as HTMLElement, state.id, state.version,
      );
    }
    const meta = response.meta;
    this.metricsPanel.textContent =
      `lens ${response.lens}${response.k ? `(k=${response.k})` : ""}  ·  ` +
      `committed v${meta.t_c} / latest v${meta.t_s} / ${meta.c_uc} pending  ·  ` +
      `invisibility ${(response.metrics.invisibility_ms / 1000).toFixed(1)} view-s  ·  ` +
      `staleness ${(response.metrics.staleness_ms / 1000).toFixed(1)} view-s`;
  }

  private renderSparkline(root: HTMLElement, id: string, version: number): void {
    const key = `${id}@${version}`;
    if (root.dataset.key === key) return;
    root.dataset.key = key;
    root.innerHTML = "";
    for (const height of sparklineBars(id, version)) {
      const bar = document.createElement("span");
      bar.style.height = `${height}%`;
      root.appendChild(bar);
    }
  }

  private async triggerRefresh(): Promise<void> {
    this.configError.textContent = "";
    try {
      await this.api.refresh();
    } catch (err) {
      this.showInlineError(err);
    }
  }

  private async applyConfig(): Promise<void> {
    this.configError.textContent = "";
    const lens = this.lensSelect.value;
    const usesK = LENS_CHOICES.find((c) => c.lens === lens)?.usesK ?? false;
    this.kSlider.disabled = !usesK;
    try {
      const applied = await this.api.configure({
        lens,
        k: usesK ? Number(this.kSlider.value) : 0,
        policy: this.policySelect.value,
      });
      this.info.config = applied;
    } catch (err) {
      this.showInlineError(err);
      this.syncControls(); // snap the controls back to the server's config
    }
  }

  private async applyPeriodic(): Promise<void> {
    this.configError.textContent = "";
    try {
      const applied = await this.api.configure({
        periodic_interval_ms: this.periodicToggle.checked
          ? Number(this.periodicInterval.value)
          : null,
      });
      this.info.config = applied;
    } catch (err) {
      this.showInlineError(err);
      this.syncControls();
    }
  }

  private showInlineError(err: unknown): void {
    if (err instanceof ApiError && err.status === 409) {
      this.configError.textContent = `refresh in progress — ${err.message}`;
    } else {
      this.configError.textContent = String(err);
    }
  }

  private showBanner(err: unknown, retryMs: number): void {
    this.banner.textContent =
      `connection lost (${err instanceof Error ? err.message : err}); ` +
      `retrying in ${(retryMs / 1000).toFixed(1)}s`;
    this.banner.classList.add("visible");
  }

  private hideBanner(): void {
    this.banner.classList.remove("visible");
  }
}

new DashboardApp().start().catch((err) => {
  const banner = document.getElementById("banner");
  if (banner) {
    banner.textContent = `failed to load dashboard: ${err}`;
    banner.classList.add("visible");
  }
});
