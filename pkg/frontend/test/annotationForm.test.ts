import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { AnnotationForm, SLIDER_ANCHORS } from "../src/annotationForm.js";
import { offlineFetch, stubService } from "./helpers.js";

function acceptingService() {
  let nextId = 1;
  return stubService({
    "POST /api/annotations": (req) => ({
      status: 200,
      body: { ...(req.body as object), annotation_id: nextId++, annotator: "alice" },
    }),
  });
}

describe("annotation form", () => {
  it("posts a valid annotation body for every slider value 0..10", async () => {
    const { fetchFn, requests } = acceptingService();
    const form = new AnnotationForm(new ApiClient("", fetchFn));
    form.selectModel("m-123");
    form.selectQuestion("separability");
    for (let value = 0; value <= 10; value++) {
      form.setSlider(value);
      const status = await form.submit();
      expect(status).toBe("sent");
    }
    expect(requests).toHaveLength(11);
    requests.forEach((req, i) => {
      expect(req.url).toBe("/api/annotations");
      expect(req.body).toEqual({
        model_id: "m-123",
        question_id: "separability",
        score: i,
      });
      const score = (req.body as { score: number }).score;
      expect(Number.isInteger(score)).toBe(true);
      expect(score).toBeGreaterThanOrEqual(0);
      expect(score).toBeLessThanOrEqual(10);
    });
    expect(form.history).toHaveLength(11);
  });

  it("snaps slider input to integers on the scale", () => {
    const form = new AnnotationForm(new ApiClient("", offlineFetch()));
    form.setSlider(6.4);
    expect(form.slider).toBe(6);
    form.setSlider(6.6);
    expect(form.slider).toBe(7);
    form.setSlider(-3);
    expect(form.slider).toBe(0);
    form.setSlider(42);
    expect(form.slider).toBe(10);
  });

  it("disables submit until model and question are selected", async () => {
    const { fetchFn } = acceptingService();
    const form = new AnnotationForm(new ApiClient("", fetchFn));
    expect(form.canSubmit).toBe(false);
    form.selectModel("m-1");
    expect(form.canSubmit).toBe(false);
    form.selectQuestion("separability");
    expect(form.canSubmit).toBe(true);
  });

  it("keeps form state on a validation rejection", async () => {
    const { fetchFn } = stubService({
      "POST /api/annotations": () => ({
        status: 422,
        body: { detail: "score must be an integer in 0..10" },
      }),
    });
    const form = new AnnotationForm(new ApiClient("", fetchFn));
    form.selectModel("m-1");
    form.selectQuestion("separability");
    form.setSlider(9);
    const status = await form.submit();
    expect(status).toBe("rejected");
    expect(form.inlineError).toContain("score");
    expect(form.slider).toBe(9);
    expect(form.modelId).toBe("m-1");
    expect(form.unsent).toHaveLength(0);
  });

  it("queues offline submissions with an explicit unsent indicator", async () => {
    const form = new AnnotationForm(new ApiClient("", offlineFetch()));
    form.selectModel("m-1");
    form.selectQuestion("separability");
    form.setSlider(3);
    const status = await form.submit();
    expect(status).toBe("queued");
    expect(form.hasUnsent).toBe(true);
    expect(form.unsent[0].body.score).toBe(3);

    // back online: the queue drains into history, nothing dropped
    const { fetchFn, requests } = acceptingService();
    const online = new AnnotationForm(new ApiClient("", fetchFn));
    online.unsent = form.unsent;
    const sent = await online.retryUnsent();
    expect(sent).toBe(1);
    expect(online.hasUnsent).toBe(false);
    expect(requests[0].body).toEqual({
      model_id: "m-1",
      question_id: "separability",
      score: 3,
    });
  });

  it("exposes the three-level vocabulary anchors on the scale ends", () => {
    expect(SLIDER_ANCHORS.map((a) => a.value)).toEqual([0, 5, 10]);
    expect(SLIDER_ANCHORS[0].label).toBe("not possible");
    expect(SLIDER_ANCHORS[2].label).toBe("easy");
  });
});
