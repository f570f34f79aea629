import init, { LiveView, defectCurve, cutoffProbe } from "./pkg/droem_web.js";

const $ = (id) => document.getElementById(id);
const STEPS_PER_FRAME = 1;

await init();

let view = null;
let pointer = [0, 0];

function makeView() {
  view = new LiveView(128, Number($("gamma-near").value), Number($("gamma-far").value));
}

function draw() {
  const ctx = $("view").getContext("2d");
  const t0 = performance.now();
  const rgba = view.advance(pointer[0], pointer[1], STEPS_PER_FRAME);
  const ms = performance.now() - t0;
  ctx.putImageData(new ImageData(new Uint8ClampedArray(rgba), view.width, view.height), 0, 0);
  $("status").textContent = `t = ${view.time.toFixed(2)}  digest ${view.digest()}  ${ms.toFixed(1)} ms/frame`;
  requestAnimationFrame(draw);
}

$("view").addEventListener("pointermove", (e) => {
  const r = e.target.getBoundingClientRect();
  pointer = [2 * (e.clientX - r.left) / r.width - 1, 1 - 2 * (e.clientY - r.top) / r.height];
});
for (const id of ["gamma-near", "gamma-far", "reset"]) {
  $(id).addEventListener(id === "reset" ? "click" : "change", makeView);
}

function plotScan(scan) {
  const c = $("curve");
  const ctx = c.getContext("2d");
  ctx.clearRect(0, 0, c.width, c.height);
  const pts = scan.hbar.map((h, i) => [Math.log(h), Math.log(scan.norms[i])]).filter(([, y]) => Number.isFinite(y));
  if (pts.length < 2) {
    ctx.fillText("defect is exact (no curve)", 10, 20);
    return;
  }
  const xs = pts.map((p) => p[0]), ys = pts.map((p) => p[1]);
  const [x0, x1, y0, y1] = [Math.min(...xs), Math.max(...xs), Math.min(...ys), Math.max(...ys)];
  const sx = (x) => 30 + (c.width - 40) * (x - x0) / (x1 - x0 || 1);
  const sy = (y) => c.height - 20 - (c.height - 40) * (y - y0) / (y1 - y0 || 1);
  ctx.beginPath();
  pts.forEach(([x, y], i) => (i ? ctx.lineTo(sx(x), sy(y)) : ctx.moveTo(sx(x), sy(y))));
  ctx.stroke();
  for (const [x, y] of pts) ctx.fillRect(sx(x) - 2, sy(y) - 2, 4, 4);
  ctx.fillText(`log norm vs log hbar, slope ${scan.exponent?.toFixed(3) ?? "n/a"}`, 30, 12);
}

$("scan").addEventListener("click", () => {
  try {
    const json = defectCurve(BigInt($("dm").value), BigInt($("dn").value), $("dhbar").value,
      Number($("ddeg").value), Number($("dwin").value));
    const scan = JSON.parse(json);
    $("scan-out").textContent = JSON.stringify(scan, null, 2);
    plotScan(scan);
  } catch (e) {
    $("scan-out").textContent = String(e);
  }
});

$("probe").addEventListener("click", () => {
  try {
    $("probe-out").textContent = cutoffProbe($("ch").value, Number($("cn").value), Number($("cdeg").value));
  } catch (e) {
    $("probe-out").textContent = String(e);
  }
});

makeView();
requestAnimationFrame(draw);
