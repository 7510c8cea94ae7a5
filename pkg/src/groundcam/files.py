"""On-disk formats shared by the command-line tools.

JSON documents are written with sorted keys and two-space indentation so a
regenerated file is byte-identical when its contents are. The calibration
document stores the rotation matrix and translation as the authoritative
pose; the Euler angles and camera center are derived conveniences written
alongside for operators.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .evaluation import EvalPair, EvalReport, report_to_dict
from .extrinsics import FieldGeometry, PnpCorrespondence
from .geometry import (
    CameraIntrinsics,
    CameraPose,
    Distortion,
    PixelPoint,
    WorldPoint,
    euler_from_pose,
)
from .intrinsics import PlanarView
from .pipeline import LocalizedObject, UnlocalizableDetection
from .regression import (
    BoundingBox,
    ClassModel,
    GroundRegressor,
    RegressionSample,
)


def _dump_json(obj: dict, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def intrinsics_to_dict(k: CameraIntrinsics) -> dict:
    d = k.distortion
    return {
        "alpha_x": k.alpha_x,
        "alpha_y": k.alpha_y,
        "u0": k.u0,
        "v0": k.v0,
        "gamma": k.gamma,
        "distortion": {"k1": d.k1, "k2": d.k2, "k3": d.k3, "p1": d.p1, "p2": d.p2},
    }


def intrinsics_from_dict(obj: dict) -> CameraIntrinsics:
    d = obj.get("distortion", {})
    return CameraIntrinsics(
        alpha_x=float(obj["alpha_x"]),
        alpha_y=float(obj["alpha_y"]),
        u0=float(obj["u0"]),
        v0=float(obj["v0"]),
        gamma=float(obj.get("gamma", 0.0)),
        distortion=Distortion(
            k1=float(d.get("k1", 0.0)),
            k2=float(d.get("k2", 0.0)),
            k3=float(d.get("k3", 0.0)),
            p1=float(d.get("p1", 0.0)),
            p2=float(d.get("p2", 0.0)),
        ),
    )


def calibration_to_dict(
    k: CameraIntrinsics, pose: CameraPose | None = None, rmse_px: float | None = None
) -> dict:
    obj: dict = {"intrinsics": intrinsics_to_dict(k)}
    if pose is not None:
        angles, center = euler_from_pose(pose)
        obj["pose"] = {
            "rotation": [float(v) for v in pose.rotation.ravel()],
            "translation": [float(v) for v in pose.translation],
        }
        obj["euler_deg"] = [angles.omega, angles.phi, angles.kappa]
        obj["camera_center_mm"] = [center.x, center.y, center.z]
    if rmse_px is not None:
        obj["rmse_px"] = rmse_px
    return obj


def save_calibration(
    path: Path,
    k: CameraIntrinsics,
    pose: CameraPose | None = None,
    rmse_px: float | None = None,
) -> None:
    _dump_json(calibration_to_dict(k, pose, rmse_px), Path(path))


def load_calibration(path: Path) -> tuple[CameraIntrinsics, CameraPose | None]:
    """Read a calibration document; the pose is None for intrinsics-only files."""
    obj = json.loads(Path(path).read_text())
    k = intrinsics_from_dict(obj["intrinsics"])
    pose = None
    if "pose" in obj:
        rotation = np.array(obj["pose"]["rotation"], dtype=float).reshape(3, 3)
        translation = np.array(obj["pose"]["translation"], dtype=float)
        pose = CameraPose(rotation, translation)
    return k, pose


def save_planar_views(
    path: Path, views: list[PlanarView], square_size_mm: float
) -> None:
    obj = {
        "square_size_mm": square_size_mm,
        "views": [
            {
                "id": v.view_id,
                "points": [
                    {
                        "pixel": [float(u), float(vv)],
                        "pattern": [float(x), float(y)],
                    }
                    for (u, vv), (x, y) in zip(v.pixels, v.pattern)
                ],
            }
            for v in views
        ],
    }
    _dump_json(obj, Path(path))


def load_planar_views(path: Path) -> tuple[list[PlanarView], float]:
    obj = json.loads(Path(path).read_text())
    views = []
    for entry in obj["views"]:
        points = entry["points"]
        views.append(
            PlanarView(
                view_id=str(entry["id"]),
                pixels=np.array([p["pixel"] for p in points], dtype=float),
                pattern=np.array([p["pattern"] for p in points], dtype=float),
            )
        )
    return views, float(obj.get("square_size_mm", 0.0))


def field_geometry_to_dict(g: FieldGeometry) -> dict:
    return {
        "field_length_mm": g.field_length,
        "field_width_mm": g.field_width,
        "goal_width_mm": g.goal_width,
        "goal_depth_mm": g.goal_depth,
        "goal_height_mm": g.goal_height,
        "penalty_depth_mm": g.penalty_depth,
        "penalty_width_mm": g.penalty_width,
    }


def field_geometry_from_dict(obj: dict) -> FieldGeometry:
    return FieldGeometry(
        field_length=float(obj["field_length_mm"]),
        field_width=float(obj["field_width_mm"]),
        goal_width=float(obj["goal_width_mm"]),
        goal_depth=float(obj["goal_depth_mm"]),
        goal_height=float(obj["goal_height_mm"]),
        penalty_depth=float(obj["penalty_depth_mm"]),
        penalty_width=float(obj["penalty_width_mm"]),
    )


def save_landmarks(
    path: Path,
    geometry: FieldGeometry,
    named: dict[str, PixelPoint],
    extra: list[PnpCorrespondence] | None = None,
) -> None:
    obj = {
        "field_geometry": field_geometry_to_dict(geometry),
        "points": [
            {"name": name, "pixel": [px.u, px.v]} for name, px in named.items()
        ],
        "extra": [
            {
                "pixel": [c.pixel.u, c.pixel.v],
                "world": [c.world.x, c.world.y, c.world.z],
            }
            for c in (extra or [])
        ],
    }
    _dump_json(obj, Path(path))


def load_landmarks(
    path: Path,
) -> tuple[FieldGeometry, dict[str, PixelPoint], list[PnpCorrespondence]]:
    obj = json.loads(Path(path).read_text())
    geometry = field_geometry_from_dict(obj["field_geometry"])
    named = {
        str(p["name"]): PixelPoint(float(p["pixel"][0]), float(p["pixel"][1]))
        for p in obj.get("points", [])
    }
    extra = [
        PnpCorrespondence(
            pixel=PixelPoint(float(e["pixel"][0]), float(e["pixel"][1])),
            world=WorldPoint(*(float(v) for v in e["world"])),
        )
        for e in obj.get("extra", [])
    ]
    return geometry, named, extra


def save_model(path: Path, regressor: GroundRegressor) -> None:
    obj = {
        "classes": {
            label: {
                "weights": [[float(v) for v in row] for row in model.weights],
                "rmse_px": model.rmse_px,
            }
            for label, model in regressor.classes.items()
        }
    }
    _dump_json(obj, Path(path))


def load_model(path: Path) -> GroundRegressor:
    obj = json.loads(Path(path).read_text())
    classes = {
        label: ClassModel(
            weights=np.array(entry["weights"], dtype=float),
            rmse_px=float(entry["rmse_px"]),
        )
        for label, entry in obj["classes"].items()
    }
    return GroundRegressor(classes=classes)


def save_samples(path: Path, samples: list[RegressionSample]) -> None:
    with open(path, "w") as f:
        for s in samples:
            f.write(
                json.dumps(
                    {
                        "class": s.label,
                        "bbox": [s.bbox.xmin, s.bbox.ymin, s.bbox.xmax, s.bbox.ymax],
                        "ground_pixel": [s.ground_pixel.u, s.ground_pixel.v],
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def load_samples(path: Path) -> list[RegressionSample]:
    samples = []
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        samples.append(
            RegressionSample(
                label=str(obj["class"]),
                bbox=BoundingBox(*(float(v) for v in obj["bbox"])),
                ground_pixel=PixelPoint(*(float(v) for v in obj["ground_pixel"])),
            )
        )
    return samples


def detection_line(frame_id: str, label: str, score: float, bbox: BoundingBox) -> str:
    return json.dumps(
        {
            "frame": frame_id,
            "class": label,
            "score": score,
            "bbox": [bbox.xmin, bbox.ymin, bbox.xmax, bbox.ymax],
        },
        sort_keys=True,
    )


def localization_line(result: LocalizedObject | UnlocalizableDetection) -> str:
    if isinstance(result, LocalizedObject):
        obj = {
            "frame": result.frame_id,
            "class": result.label,
            "x_mm": result.x_mm,
            "y_mm": result.y_mm,
            "theta_deg": result.theta_deg,
            "ground_pixel": [result.ground_pixel.u, result.ground_pixel.v],
            "status": "ok",
        }
    else:
        obj = {
            "frame": result.frame_id,
            "class": result.label,
            "x_mm": None,
            "y_mm": None,
            "theta_deg": None,
            "ground_pixel": (
                [result.ground_pixel.u, result.ground_pixel.v]
                if result.ground_pixel is not None
                else None
            ),
            "status": f"unlocalizable:{result.reason}",
        }
    return json.dumps(obj, sort_keys=True)


def load_localizations(path: Path) -> list[dict]:
    return [
        json.loads(line)
        for line in Path(path).read_text().splitlines()
        if line.strip()
    ]


PAIRS_HEADER = ["gt_x", "gt_y", "gt_theta", "est_x", "est_y", "est_theta", "source"]


def save_pairs_csv(path: Path, pairs: list[EvalPair]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(PAIRS_HEADER)
        for p in pairs:
            writer.writerow(
                [p.gt_x, p.gt_y, p.gt_theta, p.est_x, p.est_y, p.est_theta, p.source]
            )


def load_pairs_csv(path: Path) -> list[EvalPair]:
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or [
            name.strip() for name in reader.fieldnames
        ] != PAIRS_HEADER:
            raise ValueError(
                f"expected header {','.join(PAIRS_HEADER)}, got {reader.fieldnames}"
            )
        return [
            EvalPair(
                gt_x=float(row["gt_x"]),
                gt_y=float(row["gt_y"]),
                gt_theta=float(row["gt_theta"]),
                est_x=float(row["est_x"]),
                est_y=float(row["est_y"]),
                est_theta=float(row["est_theta"]),
                source=row["source"].strip(),
            )
            for row in reader
        ]


TRUTH_HEADER = ["frame", "gt_x", "gt_y", "gt_theta"]


def save_truth_csv(path: Path, rows: list[tuple[str, float, float, float]]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(TRUTH_HEADER)
        for frame_id, x, y, theta in rows:
            writer.writerow([frame_id, x, y, theta])


def load_truth_csv(path: Path) -> dict[str, tuple[float, float, float]]:
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        return {
            row["frame"]: (
                float(row["gt_x"]),
                float(row["gt_y"]),
                float(row["gt_theta"]),
            )
            for row in reader
        }


def save_report(report: EvalReport, json_path: Path, csv_path: Path | None = None) -> None:
    _dump_json(report_to_dict(report), Path(json_path))
    if csv_path is not None:
        with open(csv_path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["metric", "value"])
            writer.writerow(["rmse_mm", report.rmse_mm])
            writer.writerow(["count", report.count])
            writer.writerow(["x_mean_mm", report.stats.x.mean])
            writer.writerow(["x_std_mm", report.stats.x.std])
            writer.writerow(["y_mean_mm", report.stats.y.mean])
            writer.writerow(["y_std_mm", report.stats.y.std])
            writer.writerow(["theta_mean_deg", report.stats.theta.mean])
            writer.writerow(["theta_std_deg", report.stats.theta.std])
            for b in report.buckets:
                hi = "inf" if b.hi is None else b.hi
                writer.writerow([f"rmse_mm[{b.lo},{hi})", b.rmse_mm])
                writer.writerow([f"count[{b.lo},{hi})", b.count])


def save_scatter_csv(path: Path, pairs: list[EvalPair]) -> None:
    """Plot-ready gt/estimate positions: columns x, y, series."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["x", "y", "series"])
        for p in pairs:
            writer.writerow([p.gt_x, p.gt_y, "ground_truth"])
        for p in pairs:
            writer.writerow([p.est_x, p.est_y, p.source])


def render_report_text(report: EvalReport) -> str:
    """Fixed-decimal human summary used by the evaluation command's stderr."""
    out = io.StringIO()
    out.write(f"pairs: {report.count}\n")
    out.write(f"rmse: {report.rmse_mm:.6f} mm\n")
    s = report.stats
    out.write(f"x error: {s.x.mean:.6f} +- {s.x.std:.6f} mm\n")
    out.write(f"y error: {s.y.mean:.6f} +- {s.y.std:.6f} mm\n")
    out.write(f"theta error: {s.theta.mean:.6f} +- {s.theta.std:.6f} deg\n")
    for b in report.buckets:
        hi = "inf" if b.hi is None else f"{b.hi:.0f}"
        rmse_text = "n/a" if b.rmse_mm is None else f"{b.rmse_mm:.6f}"
        out.write(
            f"bucket [{b.lo:.0f}, {hi}) mm: count {b.count}, rmse {rmse_text} mm\n"
        )
    return out.getvalue()
