"""Box-state predictors that fill detector gaps for live tracklets.

Three predictors are available:

* ``static``  - repeats the last observed box.
* ``cv``      - constant-velocity extrapolation of the box center.
* ``kalman``  - SORT-style linear Kalman filter over (cx, cy, area, aspect)
  with velocities on center and area.

All predictors expose ``predict()`` (advance one frame, return the box),
``correct(box)`` (fold in an observation) and ``current_box()``.
"""

from __future__ import annotations

import numpy as np

from .core import BBox

MIN_SIDE = 1.0  # degenerate predictions are clamped to this side length


class StaticPredictor:
    """Holds the last observed box."""

    def __init__(self, box: BBox):
        self._box = box

    def predict(self) -> BBox:
        return self._box

    def correct(self, box: BBox) -> None:
        self._box = box

    def current_box(self) -> BBox:
        return self._box


class ConstantVelocityPredictor:
    """Extrapolates the box center with the last observed velocity.

    Size is held at the last observation. Velocity is re-estimated from the
    displacement between consecutive observations, divided by the number of
    frames between them, so detector gaps do not inflate it.
    """

    def __init__(self, box: BBox):
        cx, cy = box.center
        self._center = np.array([cx, cy], dtype=np.float64)
        self._last_obs_center = self._center.copy()
        self._velocity = np.zeros(2, dtype=np.float64)
        self._size = (box.w, box.h)
        self._frames_since_obs = 0
        self.clamped = False

    def predict(self) -> BBox:
        self._center = self._center + self._velocity
        self._frames_since_obs += 1
        return self.current_box()

    def correct(self, box: BBox) -> None:
        cx, cy = box.center
        obs = np.array([cx, cy], dtype=np.float64)
        gap = max(self._frames_since_obs, 1)
        self._velocity = (obs - self._last_obs_center) / gap
        self._center = obs
        self._last_obs_center = obs
        self._frames_since_obs = 0
        self._size = (box.w, box.h)

    def current_box(self) -> BBox:
        w, h = self._size
        if w < MIN_SIDE or h < MIN_SIDE:
            self.clamped = True
            w = max(w, MIN_SIDE)
            h = max(h, MIN_SIDE)
        return BBox(self._center[0] - w / 2.0, self._center[1] - h / 2.0, w, h)


def _box_to_measurement(box: BBox) -> np.ndarray:
    cx, cy = box.center
    s = box.area
    r = box.w / box.h
    return np.array([cx, cy, s, r], dtype=np.float64)


class KalmanBoxPredictor:
    """Constant-velocity Kalman filter on (cx, cy, s, r) with (vcx, vcy, vs).

    The aspect ratio carries no velocity. Noise scales of zero are allowed
    and make the filter lock exactly onto consistent linear motion.
    """

    _F = np.eye(7)
    _F[0, 4] = _F[1, 5] = _F[2, 6] = 1.0
    _H = np.zeros((4, 7))
    _H[0, 0] = _H[1, 1] = _H[2, 2] = _H[3, 3] = 1.0

    def __init__(
        self,
        box: BBox,
        process_noise: float = 1.0,
        measurement_noise: float = 1.0,
    ):
        z = _box_to_measurement(box)
        self.x = np.zeros(7, dtype=np.float64)
        self.x[:4] = z
        self.P = np.diag([10.0, 10.0, 10.0, 10.0, 1e4, 1e4, 1e4])
        self.Q = np.diag([1.0, 1.0, 1.0, 1e-2, 1e-2, 1e-2, 1e-4]) * process_noise
        self.R = np.diag([1.0, 1.0, 10.0, 10.0]) * measurement_noise
        self.clamped = False

    def predict(self) -> BBox:
        F = self._F
        self.x = F @ self.x
        self.P = F @ self.P @ F.T + self.Q
        return self.current_box()

    def correct(self, box: BBox) -> None:
        H = self._H
        z = _box_to_measurement(box)
        innovation = z - H @ self.x
        S = H @ self.P @ H.T + self.R
        # K = P H^T S^-1, via solve to avoid forming the inverse
        K = np.linalg.solve(S, H @ self.P).T
        self.x = self.x + K @ innovation
        self.P = (np.eye(7) - K @ H) @ self.P

    def current_box(self) -> BBox:
        cx, cy, s, r = self.x[:4]
        s = max(s, MIN_SIDE * MIN_SIDE)
        r = max(r, 1e-6)
        w = float(np.sqrt(s * r))
        h = float(s / w) if w > 0 else MIN_SIDE
        if w < MIN_SIDE or h < MIN_SIDE:
            self.clamped = True
            w = max(w, MIN_SIDE)
            h = max(h, MIN_SIDE)
        return BBox(cx - w / 2.0, cy - h / 2.0, w, h)

    @property
    def velocity(self) -> np.ndarray:
        return self.x[4:6].copy()


PREDICTOR_KINDS = ("static", "cv", "kalman")


def make_predictor(kind: str, box: BBox):
    if kind == "static":
        return StaticPredictor(box)
    if kind == "cv":
        return ConstantVelocityPredictor(box)
    if kind == "kalman":
        return KalmanBoxPredictor(box)
    raise ValueError(f"unknown predictor kind {kind!r}, expected one of {PREDICTOR_KINDS}")
