// DOM wiring for the annotation console. All state lives in the testable
// modules; this file only binds them to elements. Keyboard path: the model
// list, lod select, slider and buttons are native controls, and the voxel
// canvas orbits with the arrow keys.

import { ApiClient } from "./api.js";
import { AnnotationForm, SLIDER_ANCHORS } from "./annotationForm.js";
import { AssessmentView } from "./assessView.js";
import { overlaySvg } from "./curvePlot.js";
import { VoxelBrowser, drawScene } from "./voxelView.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function banner(message: string | undefined): void {
  const box = el<HTMLDivElement>("banner");
  box.textContent = message ?? "";
  box.hidden = !message;
}

export async function boot(): Promise<void> {
  const token = new URLSearchParams(window.location.search).get("token") ?? undefined;
  const api = new ApiClient("", (u, i) => fetch(u, i), token);
  const canvas = el<HTMLCanvasElement>("voxels");
  const browser = new VoxelBrowser(api, canvas.width, canvas.height);
  const form = new AnnotationForm(api);
  const assessment = new AssessmentView(api);
  const annotatedScores = new Map<string, number>(); // `${model}:${question}`

  const modelList = el<HTMLSelectElement>("model-list");
  const questionList = el<HTMLSelectElement>("question-list");
  const lodSelect = el<HTMLSelectElement>("lod");
  const slider = el<HTMLInputElement>("score");
  const sliderValue = el<HTMLOutputElement>("score-value");
  const submit = el<HTMLButtonElement>("submit");
  const formStatus = el<HTMLParagraphElement>("form-status");
  const unsentBadge = el<HTMLSpanElement>("unsent");
  const historyList = el<HTMLUListElement>("history");
  const assessBtn = el<HTMLButtonElement>("assess");
  const curveBox = el<HTMLDivElement>("curves");
  const peakBadge = el<HTMLSpanElement>("peak");
  const notice = el<HTMLParagraphElement>("voxel-notice");

  const anchors = el<HTMLDataListElement>("anchors");
  anchors.innerHTML = SLIDER_ANCHORS.map(
    (a) => `<option value="${a.value}" label="${a.label}"></option>`,
  ).join("");

  function redraw(): void {
    const ctx = canvas.getContext("2d");
    if (ctx) drawScene(ctx, browser.state.sprites, canvas.width, canvas.height);
    notice.textContent = browser.state.notice ?? "";
    notice.hidden = !browser.state.notice;
  }

  function syncForm(): void {
    sliderValue.value = String(form.slider);
    submit.disabled = !form.canSubmit;
    formStatus.textContent =
      form.status === "sent"
        ? "saved"
        : form.status === "rejected"
          ? `rejected: ${form.inlineError}`
          : form.status === "queued"
            ? "offline: queued locally"
            : "";
    unsentBadge.hidden = !form.hasUnsent;
    unsentBadge.textContent = form.hasUnsent
      ? `${form.unsent.length} unsent annotation(s)`
      : "";
    historyList.innerHTML = form.history
      .map(
        (h) =>
          `<li>#${h.annotation_id} ${h.model_id} ${h.question_id} = ${h.score}</li>`,
      )
      .join("");
  }

  function syncAssessment(): void {
    const s = assessment.state;
    if (s.overlay) {
      curveBox.innerHTML = overlaySvg(s.overlay);
      peakBadge.textContent = `peak ${s.peakBadge!.toFixed(3)} (1.0 means high confidence)`;
    } else {
      curveBox.textContent = s.emptyState ?? s.error ?? "";
      peakBadge.textContent = "";
    }
  }

  async function selectModel(modelId: string): Promise<void> {
    form.selectModel(modelId);
    await browser.load(modelId);
    banner(browser.state.error);
    redraw();
    syncForm();
  }

  try {
    const [models, questions] = await Promise.all([
      api.listModels(),
      api.listQuestions(),
    ]);
    modelList.innerHTML = models
      .map(
        (m) =>
          `<option value="${m.model_id}">${m.model_id} (${m.resolution}^3, ` +
          `${m.annotations} notes)</option>`,
      )
      .join("");
    questionList.innerHTML = questions
      .map((q) => `<option value="${q.id}">${q.id}: ${q.text}</option>`)
      .join("");
    if (models.length) await selectModel(models[0].model_id);
    if (questions.length) form.selectQuestion(questions[0].id);
    syncForm();
  } catch (err) {
    banner(err instanceof Error ? err.message : String(err));
  }

  modelList.addEventListener("change", () => void selectModel(modelList.value));
  questionList.addEventListener("change", () => {
    form.selectQuestion(questionList.value);
    syncForm();
  });
  lodSelect.addEventListener("change", async () => {
    await browser.setLod(Number(lodSelect.value));
    redraw();
  });
  slider.addEventListener("input", () => {
    form.setSlider(Number(slider.value));
    syncForm();
  });
  submit.addEventListener("click", async () => {
    await form.submit();
    const key = `${form.modelId}:${form.questionId}`;
    if (form.status === "sent") annotatedScores.set(key, form.slider);
    syncForm();
  });
  el<HTMLButtonElement>("retry").addEventListener("click", async () => {
    await form.retryUnsent();
    syncForm();
  });
  assessBtn.addEventListener("click", async () => {
    if (!form.modelId || !form.questionId) return;
    const key = `${form.modelId}:${form.questionId}`;
    await assessment.load(form.modelId, form.questionId, annotatedScores.get(key));
    syncAssessment();
  });

  let dragging = false;
  let last: [number, number] = [0, 0];
  canvas.addEventListener("pointerdown", (e) => {
    dragging = true;
    last = [e.clientX, e.clientY];
    canvas.setPointerCapture(e.pointerId);
  });
  canvas.addEventListener("pointermove", (e) => {
    if (!dragging) return;
    browser.orbit((e.clientX - last[0]) * 0.01, (e.clientY - last[1]) * 0.01);
    last = [e.clientX, e.clientY];
    redraw();
  });
  canvas.addEventListener("pointerup", () => (dragging = false));
  canvas.addEventListener("keydown", (e) => {
    const step = 0.1;
    if (e.key === "ArrowLeft") browser.orbit(-step, 0);
    else if (e.key === "ArrowRight") browser.orbit(step, 0);
    else if (e.key === "ArrowUp") browser.orbit(0, step);
    else if (e.key === "ArrowDown") browser.orbit(0, -step);
    else return;
    e.preventDefault();
    redraw();
  });
}

if (typeof document !== "undefined") {
  void boot();
}
