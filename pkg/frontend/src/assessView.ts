// Assessment pane: runs an assessment and overlays the predicted curve on
// the expected bell when the model already carries an annotation. A missing
// checkpoint (409) becomes an explanatory empty state instead of an error.

import { ApiClient, ApiError, type AssessResult } from "./api.js";
import { buildOverlay, type CurveOverlay } from "./curvePlot.js";

export interface AssessmentState {
  result?: AssessResult;
  overlay?: CurveOverlay;
  peakBadge?: number; // max predicted activation, straight from the payload
  emptyState?: string;
  error?: string;
}

export class AssessmentView {
  state: AssessmentState = {};

  constructor(private api: ApiClient) {}

  async load(
    modelId: string,
    questionId: string,
    annotatedScore?: number,
  ): Promise<AssessmentState> {
    this.state = {};
    try {
      const result = await this.api.assess(modelId, questionId);
      const overlay = buildOverlay(result.curve, annotatedScore);
      this.state = {
        result,
        overlay,
        peakBadge: Math.max(...result.curve),
      };
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        this.state = {
          emptyState:
            "No trained network for this question yet; train a checkpoint " +
            "to see assessments.",
        };
      } else {
        this.state = { error: err instanceof Error ? err.message : String(err) };
      }
    }
    return this.state;
  }
}
