// Annotation form state machine: slider snapped to the 11-step scale,
// submit gated on model + question selection, server rejections kept inline
// with the form state, and offline submissions parked in an explicit
// unsent queue rather than dropped.

import { ApiClient, ApiError, type AnnotationBody, type AnnotationReceipt } from "./api.js";

export interface SliderAnchor {
  value: number;
  label: string;
}

/** The three-level expert vocabulary mapped onto the 0..10 scale. */
export const SLIDER_ANCHORS: SliderAnchor[] = [
  { value: 0, label: "not possible" },
  { value: 5, label: "difficult" },
  { value: 10, label: "easy" },
];

export type SubmitStatus = "idle" | "sending" | "sent" | "rejected" | "queued";

export interface PendingAnnotation {
  body: AnnotationBody;
  reason: string;
}

export class AnnotationForm {
  modelId?: string;
  questionId?: string;
  slider = 5;
  status: SubmitStatus = "idle";
  inlineError?: string;
  history: AnnotationReceipt[] = [];
  unsent: PendingAnnotation[] = [];

  constructor(private api: ApiClient) {}

  selectModel(modelId: string): void {
    this.modelId = modelId;
    this.status = "idle";
    this.inlineError = undefined;
  }

  selectQuestion(questionId: string): void {
    this.questionId = questionId;
    this.status = "idle";
    this.inlineError = undefined;
  }

  /** Slider snaps to integers on the 0..10 scale. */
  setSlider(raw: number): void {
    this.slider = Math.min(10, Math.max(0, Math.round(raw)));
  }

  get canSubmit(): boolean {
    return this.modelId !== undefined && this.questionId !== undefined;
  }

  get hasUnsent(): boolean {
    return this.unsent.length > 0;
  }

  private body(): AnnotationBody {
    if (!this.canSubmit) throw new Error("submit requires model and question");
    return {
      model_id: this.modelId!,
      question_id: this.questionId!,
      score: this.slider,
    };
  }

  async submit(): Promise<SubmitStatus> {
    const body = this.body();
    this.status = "sending";
    this.inlineError = undefined;
    try {
      const receipt = await this.api.postAnnotation(body);
      this.history.push(receipt);
      this.status = "sent";
    } catch (err) {
      if (err instanceof ApiError) {
        // validation rejection: keep the form state for correction
        this.inlineError = err.detail;
        this.status = "rejected";
      } else {
        // offline or transport failure: queue, never silently drop
        this.unsent.push({
          body,
          reason: err instanceof Error ? err.message : String(err),
        });
        this.status = "queued";
      }
    }
    return this.status;
  }

  async retryUnsent(): Promise<number> {
    const pending = this.unsent;
    this.unsent = [];
    let sent = 0;
    for (const item of pending) {
      try {
        this.history.push(await this.api.postAnnotation(item.body));
        sent += 1;
      } catch (err) {
        this.unsent.push({
          body: item.body,
          reason: err instanceof Error ? err.message : String(err),
        });
      }
    }
    return sent;
  }
}
