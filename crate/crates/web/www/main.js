import init, { privacyCurve, posteriorSample, weightSchedule } from "./pkg/dpfts_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function plot(canvas, series, { xmin, xmax, ymin, ymax }) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 36;
  ctx.clearRect(0, 0, w, h);
  const sx = (x) => pad + ((x - xmin) / (xmax - xmin || 1)) * (w - 2 * pad);
  const sy = (y) => h - pad - ((y - ymin) / (ymax - ymin || 1)) * (h - 2 * pad);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#666";
  ctx.font = "11px sans-serif";
  ctx.fillText(ymax.toPrecision(3), 2, pad + 4);
  ctx.fillText(ymin.toPrecision(3), 2, h - pad);
  ctx.fillText(String(xmin), pad, h - pad + 14);
  ctx.fillText(String(xmax), w - pad - 20, h - pad + 14);
  for (const s of series) {
    if (s.band) {
      ctx.fillStyle = s.color;
      ctx.beginPath();
      s.xs.forEach((x, i) => ctx.lineTo(sx(x), sy(s.hi[i])));
      for (let i = s.xs.length - 1; i >= 0; i--) ctx.lineTo(sx(s.xs[i]), sy(s.lo[i]));
      ctx.fill();
      continue;
    }
    if (s.dots) {
      ctx.fillStyle = s.color;
      s.xs.forEach((x, i) => {
        ctx.beginPath();
        ctx.arc(sx(x), sy(s.ys[i]), 4, 0, 2 * Math.PI);
        ctx.fill();
      });
      continue;
    }
    ctx.strokeStyle = s.color;
    ctx.lineWidth = s.width || 2;
    ctx.setLineDash(s.dash || []);
    ctx.beginPath();
    s.xs.forEach((x, i) => ctx.lineTo(sx(x), sy(s.ys[i])));
    ctx.stroke();
    ctx.setLineDash([]);
  }
  return { sx, sy, pad };
}

function privacy() {
  const T = num("pt");
  try {
    const eps = privacyCurve(num("pq"), num("pz"), num("pn"), T);
    const xs = Array.from(eps, (_, i) => i + 1);
    plot($("pc"), [{ xs, ys: eps, color: "#1f6fb4" }], {
      xmin: 1, xmax: T, ymin: 0, ymax: Math.max(...eps) * 1.05,
    });
    $("pout").className = "note";
    $("pout").textContent = `epsilon after ${T} rounds: ${eps[T - 1].toFixed(3)}`;
  } catch (e) {
    $("pout").className = "err";
    $("pout").textContent = e.message;
  }
}

const obs = { xs: [], ys: [] };
let seed = 1;
const POINTS = 300;
const YRANGE = { ymin: -3, ymax: 3 };

function posterior() {
  const v = posteriorSample(
    Float64Array.from(obs.xs), Float64Array.from(obs.ys), POINTS,
    num("sl"), num("sm"), 0.01, num("sb"), seed,
  );
  const xs = Array.from({ length: POINTS }, (_, i) => i / (POINTS - 1));
  const block = (k) => v.subarray(k * POINTS, (k + 1) * POINTS);
  plot($("sc"), [
    { band: true, xs, lo: block(1), hi: block(2), color: "rgba(31,111,180,0.15)" },
    { xs, ys: block(0), color: "#1f6fb4" },
    { xs, ys: block(3), color: "#d95f02", width: 1 },
    { dots: true, xs: obs.xs, ys: obs.ys, color: "#222" },
  ], { xmin: 0, xmax: 1, ...YRANGE });
}

function weights() {
  const T = 15;
  const v = weightSchedule(num("wn"), num("wp"), T, $("wm").value);
  const xs = Array.from({ length: T + 1 }, (_, i) => i);
  const inside = v.subarray(0, T + 1);
  const outside = v.subarray(T + 1);
  plot($("wc"), [
    { xs, ys: inside, color: "#1b9e77" },
    { xs, ys: outside, color: "#7570b3", dash: [6, 4] },
  ], { xmin: 0, xmax: T, ymin: 0, ymax: Math.max(...inside) * 1.1 });
}

await init();

for (const id of ["pq", "pz", "pn", "pt"]) $(id).addEventListener("change", privacy);
for (const id of ["sl", "sm", "sb"]) $(id).addEventListener("change", posterior);
for (const id of ["wn", "wp", "wm"]) $(id).addEventListener("change", weights);
$("sresample").addEventListener("click", () => { seed += 1; posterior(); });
$("sclear").addEventListener("click", () => { obs.xs = []; obs.ys = []; posterior(); });
$("sc").addEventListener("click", (ev) => {
  const c = $("sc");
  const r = c.getBoundingClientRect();
  const pad = 36;
  const x = (ev.clientX - r.left - pad) / (c.width - 2 * pad);
  const y = YRANGE.ymax - ((ev.clientY - r.top - pad) / (c.height - 2 * pad)) * (YRANGE.ymax - YRANGE.ymin);
  if (x < 0 || x > 1) return;
  obs.xs.push(x);
  obs.ys.push(y);
  posterior();
});

privacy();
posterior();
weights();
