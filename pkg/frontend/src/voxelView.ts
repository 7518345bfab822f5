// Voxel preview geometry: an orbitable orthographic projection of occupied
// cells, one sprite per payload cell, painter-sorted by depth. The scene
// builder is pure; canvas drawing sits behind it so tests can count sprites
// without a DOM.

import type { ApiClient, VoxelPreview } from "./api.js";

export interface Camera {
  yaw: number; // radians around the vertical axis
  pitch: number; // radians, clamped to avoid pole flips
  zoom: number; // screen pixels per cell
}

export const DEFAULT_CAMERA: Camera = { yaw: 0.7, pitch: 0.5, zoom: 10 };

export interface FacePolygon {
  points: Array<[number, number]>;
  shade: number; // 0..1 lighting factor from the face normal
}

export interface CellSprite {
  cell: [number, number, number];
  depth: number;
  faces: FacePolygon[];
}

type Vec = [number, number, number];

function rotate(p: Vec, cam: Camera): Vec {
  const [x, y, z] = p;
  const cy = Math.cos(cam.yaw);
  const sy = Math.sin(cam.yaw);
  const cp = Math.cos(cam.pitch);
  const sp = Math.sin(cam.pitch);
  // yaw about z, then pitch about the screen-x axis
  const rx = cy * x - sy * y;
  const ry = sy * x + cy * y;
  return [rx, cp * ry - sp * z, sp * ry + cp * z];
}

const CUBE_FACES: Array<{ normal: Vec; corners: Vec[] }> = [
  { normal: [1, 0, 0], corners: [[1, 0, 0], [1, 1, 0], [1, 1, 1], [1, 0, 1]] },
  { normal: [-1, 0, 0], corners: [[0, 0, 0], [0, 0, 1], [0, 1, 1], [0, 1, 0]] },
  { normal: [0, 1, 0], corners: [[0, 1, 0], [0, 1, 1], [1, 1, 1], [1, 1, 0]] },
  { normal: [0, -1, 0], corners: [[0, 0, 0], [1, 0, 0], [1, 0, 1], [0, 0, 1]] },
  { normal: [0, 0, 1], corners: [[0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]] },
  { normal: [0, 0, -1], corners: [[0, 0, 0], [0, 1, 0], [1, 1, 0], [1, 0, 0]] },
];

/** One sprite per occupied cell: the camera-facing cube faces projected to
 * screen space, depth-sorted back to front. */
export function buildScene(
  cells: number[][],
  dim: number[],
  camera: Camera,
  width: number,
  height: number,
): CellSprite[] {
  const center: Vec = [dim[0] / 2, dim[1] / 2, dim[2] / 2];
  const sprites: CellSprite[] = [];
  for (const raw of cells) {
    const cell: [number, number, number] = [raw[0], raw[1], raw[2]];
    const faces: FacePolygon[] = [];
    let depth = 0;
    for (const face of CUBE_FACES) {
      const n = rotate(face.normal, camera);
      if (n[1] >= 0) continue; // back-facing (view looks along +screen-depth)
      const points = face.corners.map((corner) => {
        const p = rotate(
          [
            cell[0] + corner[0] - center[0],
            cell[1] + corner[1] - center[1],
            cell[2] + corner[2] - center[2],
          ],
          camera,
        );
        return [
          width / 2 + p[0] * camera.zoom,
          height / 2 - p[2] * camera.zoom,
        ] as [number, number];
      });
      faces.push({ points, shade: 0.55 + 0.45 * Math.min(1, -n[1]) });
    }
    const c = rotate(
      [cell[0] + 0.5 - center[0], cell[1] + 0.5 - center[1], cell[2] + 0.5 - center[2]],
      camera,
    );
    depth = c[1];
    sprites.push({ cell, depth, faces });
  }
  sprites.sort((a, b) => b.depth - a.depth); // far cells first
  return sprites;
}

export function drawScene(
  ctx: CanvasRenderingContext2D,
  sprites: CellSprite[],
  width: number,
  height: number,
): void {
  ctx.clearRect(0, 0, width, height);
  for (const sprite of sprites) {
    for (const face of sprite.faces) {
      const tone = Math.round(90 + 130 * face.shade);
      ctx.fillStyle = `rgb(${Math.round(tone * 0.45)}, ${Math.round(tone * 0.72)}, ${tone})`;
      ctx.strokeStyle = "rgba(18, 28, 40, 0.35)";
      ctx.beginPath();
      ctx.moveTo(face.points[0][0], face.points[0][1]);
      for (const [x, y] of face.points.slice(1)) ctx.lineTo(x, y);
      ctx.closePath();
      ctx.fill();
      ctx.stroke();
    }
  }
}

export interface BrowserState {
  modelId?: string;
  lod: number;
  preview?: VoxelPreview;
  sprites: CellSprite[];
  notice?: string;
  error?: string;
}

/** Fetch + scene state for the model browser pane. Rendered cell count is
 * always exactly the preview payload's cell count. */
export class VoxelBrowser {
  state: BrowserState = { lod: 64, sprites: [] };
  camera: Camera = { ...DEFAULT_CAMERA };

  constructor(
    private api: ApiClient,
    private width = 480,
    private height = 360,
  ) {}

  get cellCount(): number {
    return this.state.sprites.length;
  }

  async load(modelId: string, lod?: number): Promise<BrowserState> {
    if (lod !== undefined) this.state.lod = lod;
    this.state.modelId = modelId;
    try {
      const preview = await this.api.voxelPreview(modelId, this.state.lod);
      this.state.preview = preview;
      this.state.sprites = buildScene(
        preview.cells, preview.dim, this.camera, this.width, this.height,
      );
      this.state.notice =
        preview.cells.length === 0 ? "no voxels in this preview" : undefined;
      this.state.error = undefined;
    } catch (err) {
      this.state.error = err instanceof Error ? err.message : String(err);
      this.state.sprites = [];
      this.state.preview = undefined;
    }
    return this.state;
  }

  async setLod(lod: number): Promise<BrowserState> {
    if (!this.state.modelId) {
      this.state.lod = lod;
      return this.state;
    }
    return this.load(this.state.modelId, lod);
  }

  orbit(deltaYaw: number, deltaPitch: number): void {
    this.camera.yaw += deltaYaw;
    this.camera.pitch = Math.max(
      -1.45,
      Math.min(1.45, this.camera.pitch + deltaPitch),
    );
    if (this.state.preview) {
      this.state.sprites = buildScene(
        this.state.preview.cells,
        this.state.preview.dim,
        this.camera,
        this.width,
        this.height,
      );
    }
  }
}
