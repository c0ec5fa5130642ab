// Drives the demo page. All heavy lifting happens in the wasm module; this
// file only wires inputs to the three exported ops and draws the results on
// plain canvases.

import init, { budget_sweep, risk_coverage, triage_preview } from "./pkg/gradegate_wasm.js";

const COLORS = { posterior: "#2563eb", trust: "#d97706", gp: "#059669" };
const SWEEP_BUDGETS = [0.01, 0.02, 0.04, 0.06, 0.08, 0.1, 0.12, 0.16, 0.2, 0.25, 0.3];

const el = (id) => document.getElementById(id);
const controls = {
  nAnswers: el("n-answers"),
  noise: el("noise"),
  seed: el("seed"),
  method: el("method"),
  budget: el("budget"),
  grader: el("grader"),
};

function readConfig() {
  return {
    n_answers: Number(controls.nAnswers.value),
    noise_rate: Number(controls.noise.value),
    seed: Number(controls.seed.value),
    method: controls.method.value,
    budget: Number(controls.budget.value),
    budgets: SWEEP_BUDGETS,
    grader_noise: Number(controls.grader.value),
  };
}

function showOutputs() {
  el("n-answers-out").textContent = controls.nAnswers.value;
  el("noise-out").textContent = Number(controls.noise.value).toFixed(2);
  el("budget-out").textContent = Number(controls.budget.value).toFixed(2);
  el("grader-out").textContent = Number(controls.grader.value).toFixed(2);
}

function call(op, config) {
  const out = JSON.parse(op(JSON.stringify(config)));
  if (out.error) throw new Error(out.error);
  return out;
}

function fail(message) {
  const status = el("status");
  status.style.display = "block";
  status.textContent = message;
}

// --- canvas plotting ------------------------------------------------------

function drawChart(canvas, { series, xTicks, yTicks, xFmt, yFmt }) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width;
  const h = canvas.height;
  const pad = { left: 52, right: 14, top: 14, bottom: 34 };
  ctx.clearRect(0, 0, w, h);

  const xs = series.flatMap((s) => s.points.map((p) => p.x));
  const ys = series.flatMap((s) => s.points.map((p) => p.y)).concat(yTicks);
  const xMin = Math.min(...xs);
  const xMax = Math.max(...xs);
  const yMin = 0;
  const yMax = Math.max(...ys) * 1.05 || 1;
  const px = (x) => pad.left + ((x - xMin) / (xMax - xMin)) * (w - pad.left - pad.right);
  const py = (y) => h - pad.bottom - ((y - yMin) / (yMax - yMin)) * (h - pad.top - pad.bottom);

  ctx.strokeStyle = "#d8dde6";
  ctx.fillStyle = "#5b6575";
  ctx.lineWidth = 1;
  ctx.font = "11px system-ui, sans-serif";
  for (const t of yTicks) {
    if (t > yMax) continue;
    ctx.beginPath();
    ctx.moveTo(pad.left, py(t));
    ctx.lineTo(w - pad.right, py(t));
    ctx.stroke();
    ctx.textAlign = "right";
    ctx.fillText(yFmt(t), pad.left - 6, py(t) + 4);
  }
  for (const t of xTicks) {
    ctx.textAlign = "center";
    ctx.fillText(xFmt(t), px(t), h - pad.bottom + 16);
  }
  ctx.strokeStyle = "#9aa3b2";
  ctx.strokeRect(pad.left, pad.top, w - pad.left - pad.right, h - pad.top - pad.bottom);

  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.fillStyle = s.color;
    ctx.lineWidth = s.dash ? 1.4 : 2;
    ctx.setLineDash(s.dash ? [5, 4] : []);
    ctx.beginPath();
    s.points.forEach((p, i) => (i ? ctx.lineTo(px(p.x), py(p.y)) : ctx.moveTo(px(p.x), py(p.y))));
    ctx.stroke();
    ctx.setLineDash([]);
    if (!s.dash) {
      for (const p of s.points) {
        ctx.beginPath();
        ctx.arc(px(p.x), py(p.y), 2.6, 0, Math.PI * 2);
        ctx.fill();
      }
    }
  }

  let lx = pad.left + 10;
  const ly = pad.top + 14;
  for (const s of series.filter((s) => s.label)) {
    ctx.strokeStyle = s.color;
    ctx.lineWidth = s.dash ? 1.4 : 2.4;
    ctx.setLineDash(s.dash ? [5, 4] : []);
    ctx.beginPath();
    ctx.moveTo(lx, ly - 4);
    ctx.lineTo(lx + 18, ly - 4);
    ctx.stroke();
    ctx.setLineDash([]);
    ctx.fillStyle = "#1c2330";
    ctx.textAlign = "left";
    ctx.fillText(s.label, lx + 23, ly);
    lx += 23 + ctx.measureText(s.label).width + 18;
  }
}

function group(rows, key) {
  const out = new Map();
  for (const row of rows) {
    if (!out.has(row[key])) out.set(row[key], []);
    out.get(row[key]).push(row);
  }
  return out;
}

// --- panels ---------------------------------------------------------------

function renderSweep(config) {
  const { rows } = call(budget_sweep, config);
  const series = [];
  for (const [method, points] of group(rows, "method")) {
    series.push({
      label: `${method} coverage`,
      color: COLORS[method],
      points: points.map((r) => ({ x: r.e, y: r.coverage })),
    });
    series.push({
      label: `${method} rmse`,
      color: COLORS[method],
      dash: true,
      points: points.map((r) => ({ x: r.e, y: r.final_rmse })),
    });
  }
  drawChart(el("sweep-chart"), {
    series,
    xTicks: SWEEP_BUDGETS,
    yTicks: [0, 0.25, 0.5, 0.75, 1],
    xFmt: (t) => t.toFixed(2),
    yFmt: (t) => t.toFixed(2),
  });
}

function renderRisk(config) {
  const { rows } = call(risk_coverage, config);
  const series = [];
  for (const [method, points] of group(rows, "method")) {
    series.push({
      label: method,
      color: COLORS[method],
      points: points.map((r) => ({ x: r.fraction, y: r.rmse })),
    });
  }
  drawChart(el("risk-chart"), {
    series,
    xTicks: [0.2, 0.4, 0.6, 0.8, 1],
    yTicks: [0, 0.25, 0.5, 0.75, 1],
    xFmt: (t) => `${Math.round(t * 100)}%`,
    yFmt: (t) => t.toFixed(2),
  });
}

function renderPreview(config) {
  const out = call(triage_preview, config);
  const tau = out.tau === null ? "∞ (all human)" : out.tau.toFixed(4);
  el("preview-stats").innerHTML = [
    `τ = <b>${tau}</b>`,
    `coverage <b>${(out.coverage * 100).toFixed(1)}%</b>`,
    `final RMSE <b>${out.final_rmse.toFixed(4)}</b> (budget ${out.e.toFixed(2)})`,
    `auto <b>${out.n_auto}</b> / human <b>${out.n_human}</b> of ${out.n_total}`,
    `dev err <b>${out.dev_err.toFixed(4)}</b>`,
  ]
    .map((s) => `<span>${s}</span>`)
    .join("");

  const body = el("preview-body");
  body.replaceChildren();
  out.items.forEach((item, i) => {
    const tr = document.createElement("tr");
    const auto = item.route === "auto";
    const wrong = auto && item.predicted !== item.gold;
    const cells = [
      ["", String(i + 1)],
      ["route", item.route],
      ["num", item.confidence === null ? "-" : item.confidence.toFixed(4)],
      [`num${wrong ? " wrong" : ""}`, auto ? String(item.predicted) : "-"],
      ["num", auto ? "-" : String(item.human_score)],
      ["num", String(item.gold)],
      ["answer", item.text],
    ];
    for (const [cls, text] of cells) {
      const td = document.createElement("td");
      if (cls === "route") {
        const badge = document.createElement("span");
        badge.className = `route ${item.route}`;
        badge.textContent = item.route;
        td.appendChild(badge);
      } else {
        if (cls) td.className = cls;
        td.textContent = text;
        if (cls === "answer") td.title = item.text;
      }
      tr.appendChild(td);
    }
    body.appendChild(tr);
  });
}

// --- wiring ---------------------------------------------------------------

let pending = null;

function render() {
  showOutputs();
  const config = readConfig();
  try {
    renderSweep(config);
    renderRisk(config);
    renderPreview(config);
    el("status").style.display = "none";
  } catch (err) {
    fail(String(err));
  }
}

function schedule() {
  clearTimeout(pending);
  pending = setTimeout(render, 120);
}

async function main() {
  showOutputs();
  try {
    await init();
  } catch (err) {
    fail(
      "Could not load the wasm module. Build it first:\n" +
        "  wasm-pack build crates/wasm --target web --out-dir ../../www/pkg\n" +
        `then serve this directory over HTTP.\n\n${err}`,
    );
    return;
  }
  for (const input of Object.values(controls)) {
    input.addEventListener("input", schedule);
  }
  render();
}

main();
