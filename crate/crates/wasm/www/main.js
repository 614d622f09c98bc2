import init, { spectrum, run, certificateMap, presetConfig } from "./pkg/ntrack_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

function report(id, text, isError = false) {
  const el = $(id);
  el.textContent = text;
  el.className = isError ? "out err" : "out";
}

function guarded(outId, fn) {
  return () => {
    try {
      fn();
    } catch (e) {
      report(outId, String(e.message ?? e), true);
    }
  };
}

function clear(canvas) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.font = "11px system-ui, sans-serif";
  return ctx;
}

// Plot frame with linear x and log10 y; returns the coordinate maps.
function frame(ctx, canvas, xMax, yLo, yHi, xLabel, yLabel) {
  const pad = { l: 52, r: 12, t: 12, b: 34 };
  const w = canvas.width - pad.l - pad.r;
  const h = canvas.height - pad.t - pad.b;
  const x = (v) => pad.l + (v / xMax) * w;
  const y = (v) => pad.t + ((yHi - Math.log10(v)) / (yHi - yLo)) * h;
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad.l, pad.t, w, h);
  ctx.fillStyle = "#444";
  for (let d = Math.ceil(yLo); d <= yHi; d += Math.max(1, Math.round((yHi - yLo) / 8))) {
    ctx.fillText(`1e${d}`, 6, y(10 ** d) + 4);
    ctx.strokeStyle = "#eee";
    ctx.beginPath();
    ctx.moveTo(pad.l, y(10 ** d));
    ctx.lineTo(pad.l + w, y(10 ** d));
    ctx.stroke();
  }
  ctx.fillText("0", pad.l - 3, canvas.height - 18);
  ctx.fillText(String(xMax), pad.l + w - 24, canvas.height - 18);
  ctx.fillText(xLabel, pad.l + w / 2 - 30, canvas.height - 6);
  ctx.fillText(yLabel, pad.l + 6, pad.t + 12);
  return { x, y };
}

function drawTopology() {
  const kind = $("topo-kind").value;
  const s = JSON.parse(spectrum(kind, num("topo-n"), num("topo-tau"), num("topo-seed")));

  const g = $("topo-graph");
  const ctx = clear(g);
  const r = g.width / 2 - 20;
  const pos = (i) => [g.width / 2 + r * Math.cos((2 * Math.PI * i) / s.n), g.height / 2 + r * Math.sin((2 * Math.PI * i) / s.n)];
  ctx.strokeStyle = "#888";
  for (const [i, j] of s.edges) {
    ctx.beginPath();
    ctx.moveTo(...pos(i));
    ctx.lineTo(...pos(j));
    ctx.stroke();
  }
  ctx.fillStyle = COLORS[0];
  for (let i = 0; i < s.n; i++) {
    ctx.beginPath();
    ctx.arc(...pos(i), 4, 0, 2 * Math.PI);
    ctx.fill();
  }

  const e = $("topo-eigs");
  const ec = clear(e);
  const pad = 36;
  const top = Math.max(2, ...s.eigenvalues);
  const x = (k) => pad + (k + 0.5) * ((e.width - 2 * pad) / s.eigenvalues.length);
  const y = (v) => e.height - pad - (v / top) * (e.height - 2 * pad);
  ec.strokeStyle = "#999";
  ec.strokeRect(pad, pad, e.width - 2 * pad, e.height - 2 * pad);
  ec.fillStyle = "#444";
  ec.fillText("eigenvalues of I - W", pad + 6, pad - 8);
  ec.fillText("0", pad - 14, y(0) + 4);
  ec.fillText(top.toFixed(1), pad - 26, y(top) + 4);
  ec.strokeStyle = COLORS[1];
  s.eigenvalues.forEach((v, k) => {
    ec.beginPath();
    ec.moveTo(x(k), y(0));
    ec.lineTo(x(k), y(v));
    ec.stroke();
    ec.beginPath();
    ec.arc(x(k), y(v), 2.5, 0, 2 * Math.PI);
    ec.stroke();
  });

  const gap = s.lambda_hat_min == null ? "none" : s.lambda_hat_min.toFixed(4);
  report("topo-out", `${s.edges.length} edges   lambda_max ${s.lambda_max.toFixed(4)}   smallest nonzero ${gap}`);
}

function compareConfig() {
  const config = JSON.parse(presetConfig("logistic-n10"));
  config.name = "compare";
  config.iterations = 400;
  config.analysis = { certificate: false, checks: false };
  config.algorithms = [
    { method: "newton_tracking", alpha: 3.3, eps: 3.0 },
    { method: "gradient_tracking", alpha: 0.02 },
    { method: "extra", alpha: 0.06 },
    { method: "dlm", alpha: 0.3, eps: 5.0 },
  ];
  return config;
}

function loadConfig() {
  const name = $("run-preset").value;
  const config = name === "compare" ? compareConfig() : JSON.parse(presetConfig(name));
  $("run-config").value = JSON.stringify(config, null, 2);
}

function drawRun() {
  const started = performance.now();
  const result = JSON.parse(run($("run-config").value));
  const axis = $("run-axis").value;
  const canvas = $("run-plot");
  const ctx = clear(canvas);
  const finite = result.curves.flatMap((c) => c.rel_errors).filter((v) => v > 0 && Number.isFinite(v));
  const yLo = Math.floor(Math.log10(Math.max(1e-16, Math.min(...finite))));
  const yHi = Math.max(1, Math.ceil(Math.log10(Math.max(...finite))));
  const xMax = Math.max(1, ...result.curves.map((c) => c[axis].at(-1)));
  const { x, y } = frame(ctx, canvas, xMax, yLo, yHi, axis.replace("_", " "), "relative error");

  const lines = [];
  result.curves.forEach((c, k) => {
    ctx.strokeStyle = COLORS[k % COLORS.length];
    ctx.beginPath();
    let open = false;
    c.rel_errors.forEach((v, t) => {
      if (!(v > 0)) return;
      const px = x(c[axis][t]);
      const py = y(Math.max(v, 10 ** yLo));
      if (open) ctx.lineTo(px, py);
      else ctx.moveTo(px, py);
      open = true;
    });
    ctx.stroke();
    ctx.fillStyle = ctx.strokeStyle;
    ctx.fillText(c.label, canvas.width - 150, 28 + 14 * k);
    const tail = c.rel_errors.at(-1);
    lines.push(`${c.label.padEnd(20)} final ${tail.toExponential(2)}${c.diverged ? "  (diverged)" : ""}`);
  });
  const ms = (performance.now() - started).toFixed(0);
  report("run-out", `${lines.join("\n")}\nmu_f ${result.mu_f.toExponential(2)}  L_f ${result.l_f.toFixed(3)}  (${ms} ms)`);
}

function drawCertificate() {
  const steps = num("cert-steps");
  const m = JSON.parse(
    certificateMap(num("cert-mu"), num("cert-l"), num("cert-lmax"), num("cert-lhat"),
      num("cert-a0"), num("cert-a1"), num("cert-e0"), num("cert-e1"), steps),
  );
  const canvas = $("cert-plot");
  const ctx = clear(canvas);
  const pad = { l: 60, r: 110, t: 10, b: 36 };
  const cw = (canvas.width - pad.l - pad.r) / steps;
  const ch = (canvas.height - pad.t - pad.b) / steps;
  const logs = m.delta_prime.flat().filter((v) => v != null).map(Math.log10);
  const lo = Math.min(...logs);
  const hi = Math.max(...logs);
  const shade = (v) => {
    const t = hi > lo ? (Math.log10(v) - lo) / (hi - lo) : 1;
    return `hsl(${240 - 200 * t}, 70%, ${35 + 25 * t}%)`;
  };
  m.delta_prime.forEach((row, i) =>
    row.forEach((v, j) => {
      ctx.fillStyle = v == null ? "#e4e4e4" : shade(v);
      // eps grows upward
      ctx.fillRect(pad.l + j * cw, canvas.height - pad.b - (i + 1) * ch, Math.ceil(cw), Math.ceil(ch));
    }),
  );
  ctx.fillStyle = "#444";
  ctx.fillText(`alpha ${m.alpha[0].toPrecision(2)} .. ${m.alpha.at(-1).toPrecision(3)} (log)`, pad.l, canvas.height - 12);
  ctx.save();
  ctx.translate(14, canvas.height / 2 + 40);
  ctx.rotate(-Math.PI / 2);
  ctx.fillText(`eps ${m.eps[0].toPrecision(2)} .. ${m.eps.at(-1).toPrecision(3)} (log)`, 0, 0);
  ctx.restore();
  const legendX = canvas.width - pad.r + 14;
  ctx.fillText("log10 delta'", legendX, pad.t + 12);
  if (logs.length) {
    ctx.fillText(hi.toFixed(2), legendX, pad.t + 30);
    ctx.fillText(lo.toFixed(2), legendX, pad.t + 46);
  }
  ctx.fillStyle = "#e4e4e4";
  ctx.fillRect(legendX, pad.t + 56, 12, 12);
  ctx.fillStyle = "#444";
  ctx.fillText("infeasible", legendX + 16, pad.t + 66);

  let best = null;
  m.delta_prime.forEach((row, i) =>
    row.forEach((v, j) => {
      if (v != null && (best == null || v > best.v)) best = { v, alpha: m.alpha[j], eps: m.eps[i] };
    }),
  );
  report(
    "cert-out",
    best == null
      ? "no certified pair in this window"
      : `best delta' ${best.v.toExponential(3)} at alpha ${best.alpha.toPrecision(3)}, eps ${best.eps.toPrecision(3)}`,
  );
}

await init();
$("topo-go").onclick = guarded("topo-out", drawTopology);
$("run-go").onclick = guarded("run-out", drawRun);
$("cert-go").onclick = guarded("cert-out", drawCertificate);
$("run-preset").onchange = guarded("run-out", loadConfig);
guarded("run-out", loadConfig)();
guarded("topo-out", drawTopology)();
guarded("cert-out", drawCertificate)();
