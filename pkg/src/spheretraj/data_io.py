"""Ingestion of real track data, synthetic families, and export formats.

Supports the HURDAT2 best-track layout and a generic ``id,timestamp,lat,lon``
CSV contract. All geographic work happens in 3-vector space: latitude and
longitude are converted to unit vectors immediately, so antimeridian
crossings never need unwrapping.
"""

from __future__ import annotations

import csv
import io
import json
import re
import warnings
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np
from scipy.stats import beta as _beta

from . import geometry as geo
from .errors import MalformedDataLineError, MalformedHeaderError, UnsupportedCombinationError
from .trajectory import Trajectory, Warp, _slerp_segments, uniform_grid


@dataclass
class GeoTrack:
    """One track: strictly increasing UTC fixes with geographic coordinates."""

    id: str
    name: str
    times: np.ndarray  # datetime64[s], strictly increasing
    lat: np.ndarray    # degrees in [-90, 90]
    lon: np.ndarray    # degrees in (-180, 180]

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype="datetime64[s]")
        self.lat = np.asarray(self.lat, dtype=float)
        self.lon = np.asarray(self.lon, dtype=float)
        if len(self.times) < 2:
            raise ValueError(f"track {self.id}: need at least 2 fixes")
        if np.any(np.diff(self.times.astype("int64")) <= 0):
            raise ValueError(f"track {self.id}: timestamps must be strictly increasing")

    def __len__(self) -> int:
        return len(self.times)


def normalize_longitude(lon):
    """Wrap degrees into (-180, 180]."""
    lon = np.asarray(lon, dtype=float)
    out = ((lon + 180.0) % 360.0) - 180.0
    return np.where(out == -180.0, 180.0, out)


def latlon_to_sphere(lat, lon) -> np.ndarray:
    """Geographic degrees to unit 3-vectors: (cos(phi)cos(lam), cos(phi)sin(lam), sin(phi))."""
    phi = np.radians(np.asarray(lat, dtype=float))
    lam = np.radians(np.asarray(lon, dtype=float))
    return np.stack([np.cos(phi) * np.cos(lam), np.cos(phi) * np.sin(lam), np.sin(phi)], axis=-1)


def sphere_to_latlon(x) -> tuple[np.ndarray, np.ndarray]:
    """Unit 3-vectors back to (lat, lon) degrees."""
    x = np.asarray(x, dtype=float)
    lat = np.degrees(np.arcsin(np.clip(x[..., 2], -1.0, 1.0)))
    lon = np.degrees(np.arctan2(x[..., 1], x[..., 0]))
    return lat, lon


_HEADER_RE = re.compile(r"^(?P<id>[A-Z]{2}\d{6})\s*,\s*(?P<name>[^,]*)\s*,\s*(?P<count>\d+)\s*,?\s*$")


def _parse_coord(token: str, positive: str, negative: str, line_no: int) -> float:
    token = token.strip()
    if not token or token[-1] not in positive + negative:
        raise MalformedDataLineError(line_no, f"bad coordinate field {token!r}")
    try:
        value = float(token[:-1])
    except ValueError as exc:
        raise MalformedDataLineError(line_no, f"bad coordinate field {token!r}") from exc
    return value if token[-1] in positive else -value


def parse_hurdat2(source) -> list[GeoTrack]:
    """Parse the HURDAT2 comma-separated layout into tracks.

    Each storm starts with a header ``BBNNYYYY, NAME, K,`` followed by K data
    lines whose consumed fields are date, time, latitude (like ``28.0N``) and
    longitude (like ``94.8W``). A malformed header or data line aborts only
    the offending storm (reported via warnings); storms with fewer than two
    usable fixes are dropped with a warning.
    """
    text = source.read() if hasattr(source, "read") else source
    lines = text.splitlines()
    tracks: list[GeoTrack] = []
    dropped = 0
    i = 0
    while i < len(lines):
        line = lines[i].strip()
        i += 1
        if not line:
            continue
        header = _HEADER_RE.match(line)
        if header is None:
            warnings.warn(f"line {i}: expected a storm header, skipping: {line[:60]!r}")
            dropped += 1
            # resync: swallow lines until the next header
            while i < len(lines) and not _HEADER_RE.match(lines[i].strip()):
                i += 1
            continue
        storm_id = header["id"]
        name = header["name"].strip()
        declared = int(header["count"])
        times, lats, lons = [], [], []
        bad = None
        for k in range(declared):
            if i >= len(lines):
                bad = MalformedDataLineError(i, f"storm {storm_id}: file ended mid-storm")
                break
            row = [f.strip() for f in lines[i].split(",")]
            line_no = i + 1
            i += 1
            try:
                if len(row) < 6:
                    raise MalformedDataLineError(line_no, f"expected >= 6 fields, got {len(row)}")
                stamp = datetime.strptime(row[0] + row[1], "%Y%m%d%H%M").replace(tzinfo=timezone.utc)
                lat = _parse_coord(row[4], "N", "S", line_no)
                lon = normalize_longitude(_parse_coord(row[5], "E", "W", line_no))
                times.append(np.datetime64(stamp.replace(tzinfo=None), "s"))
                lats.append(lat)
                lons.append(float(lon))
            except (MalformedDataLineError, ValueError) as exc:
                bad = exc if isinstance(exc, MalformedDataLineError) else \
                    MalformedDataLineError(line_no, str(exc))
                # stay in sync: swallow the rest of the declared block
                i += declared - k - 1
                break
        if bad is not None:
            warnings.warn(f"storm {storm_id} dropped: {bad}")
            dropped += 1
            continue
        # drop non-increasing fixes (rare duplicate timestamps)
        keep = [0] + [k for k in range(1, len(times)) if times[k] > times[k - 1]]
        if len(keep) < len(times):
            warnings.warn(f"storm {storm_id}: dropped {len(times) - len(keep)} non-increasing fixes")
        if len(keep) < 2:
            warnings.warn(f"storm {storm_id} dropped: fewer than 2 usable fixes")
            dropped += 1
            continue
        tracks.append(GeoTrack(
            id=storm_id, name=name,
            times=np.array([times[k] for k in keep]),
            lat=np.array([lats[k] for k in keep]),
            lon=np.array([lons[k] for k in keep]),
        ))
    if dropped:
        warnings.warn(f"dropped {dropped} storm(s) while parsing")
    return tracks


def parse_track_csv(source) -> list[GeoTrack]:
    """Parse the generic track contract: header ``id,timestamp,lat,lon``, RFC-3339 times."""
    text = source.read() if hasattr(source, "read") else source
    reader = csv.DictReader(io.StringIO(text))
    needed = {"id", "timestamp", "lat", "lon"}
    if reader.fieldnames is None or not needed.issubset(set(reader.fieldnames)):
        raise MalformedHeaderError(1, f"expected columns {sorted(needed)}, got {reader.fieldnames}")
    rows: dict[str, list] = {}
    for rec in reader:
        stamp = datetime.fromisoformat(rec["timestamp"].replace("Z", "+00:00"))
        stamp = stamp.astimezone(timezone.utc).replace(tzinfo=None)
        rows.setdefault(rec["id"], []).append(
            (np.datetime64(stamp, "s"), float(rec["lat"]), float(normalize_longitude(float(rec["lon"]))))
        )
    tracks = []
    for track_id, fixes in rows.items():
        fixes.sort(key=lambda f: f[0])
        times, lats, lons = zip(*fixes)
        tracks.append(GeoTrack(id=track_id, name=track_id, times=np.array(times),
                               lat=np.array(lats), lon=np.array(lons)))
    return tracks


def load_tracks(path) -> list[GeoTrack]:
    """Read a track file, autodetecting HURDAT2 vs the generic CSV contract."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    first = text.lstrip().splitlines()[0] if text.strip() else ""
    if _HEADER_RE.match(first.strip()):
        return parse_hurdat2(text)
    return parse_track_csv(text)


def filter_tracks(tracks, start_lat_max: float, end_lat_min: float,
                  year_range: tuple[int, int]) -> list[GeoTrack]:
    """Keep tracks starting below ``start_lat_max``, ending above ``end_lat_min``,
    and whose first fix falls in ``year_range`` (inclusive)."""
    lo, hi = year_range
    out = []
    for t in tracks:
        year = t.times[0].astype("datetime64[Y]").astype(int) + 1970
        if t.lat[0] < start_lat_max and t.lat[-1] > end_lat_min and lo <= year <= hi:
            out.append(t)
    return out


def to_trajectory(track: GeoTrack, n: int = 100) -> Trajectory:
    """Embed a track on the sphere and resample to ``n`` uniform time samples.

    The original (non-uniform) timestamps drive the resampling; segments are
    interpolated along great circles.
    """
    pts = latlon_to_sphere(track.lat, track.lon)
    rel = (track.times - track.times[0]).astype("timedelta64[s]").astype(float)
    rel = rel / rel[-1]
    return Trajectory(_slerp_segments(pts, rel, np.linspace(0.0, 1.0, n)))


# ---------------------------------------------------------------------------
# synthetic families

@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a family of warped copies of one base path.

    ``count`` is the family size; ``concentration`` scales how far each random
    warp strays from the identity (0 gives the identity warp exactly); ``noise``
    is the scale of a smooth random tangential perturbation.
    """

    base: str = "great_arc"       # great_arc | bump | two_bump
    count: int = 1
    concentration: float = 1.0
    noise: float = 0.0
    seed: int = 0
    grid: int = 100
    #: optional random rigid rotation of each member, radians
    start_scatter: float = 0.0


_BASE_START = latlon_to_sphere(8.0, -55.0)
_BASE_END = latlon_to_sphere(45.0, -10.0)
_BUMP_AMPLITUDE = 0.35
#: identity share of every random warp; keeps slopes inside the DP lattice range
_WARP_IDENTITY_BLEND = 0.35


def _base_samples(kind: str, times: np.ndarray) -> np.ndarray:
    arc = geo.geodesic_point(_BASE_START, _BASE_END, times)
    normal = np.cross(_BASE_START, _BASE_END)
    normal = normal / np.linalg.norm(normal)
    if kind == "great_arc":
        return arc
    if kind == "bump":
        angle = _BUMP_AMPLITUDE * np.sin(np.pi * times)
    elif kind == "two_bump":
        angle = _BUMP_AMPLITUDE * np.sin(2.0 * np.pi * times)
    else:
        raise ValueError(f"unknown base kind {kind!r}")
    return np.cos(angle)[:, None] * arc + np.sin(angle)[:, None] * normal


def random_warp(rng, n: int, concentration: float, components: int = 3) -> Warp:
    """Random warp: identity blended with a mixture of beta CDFs.

    ``concentration`` 0 returns the identity exactly; moderate values keep
    slopes within the alignment lattice's representable range.
    """
    t = uniform_grid(n)
    weights = rng.dirichlet(np.ones(components))
    vals = _WARP_IDENTITY_BLEND * t
    for j in range(components):
        a = 1.0 + concentration * rng.uniform()
        b = 1.0 + concentration * rng.uniform()
        vals = vals + (1.0 - _WARP_IDENTITY_BLEND) * weights[j] * _beta.cdf(t, a, b)
    return Warp(vals)


def generate_synthetic(spec: SyntheticSpec) -> list[Trajectory]:
    """Family of warped (optionally noisy) copies of the base path; deterministic per seed."""
    if spec.count < 1:
        raise ValueError("count must be >= 1")
    if spec.noise < 0:
        raise ValueError("noise must be >= 0")
    rng = np.random.default_rng(spec.seed)
    times = uniform_grid(spec.grid)
    out = []
    for _ in range(spec.count):
        gamma = random_warp(rng, spec.grid, spec.concentration)
        samples = _base_samples(spec.base, gamma.values)
        if spec.noise > 0:
            coeff = rng.normal(0.0, spec.noise, size=2)
            field = coeff[0] * np.sin(np.pi * times) + coeff[1] * np.sin(2.0 * np.pi * times)
            direction = geo.project_tangent(samples, np.cross(samples, _BASE_START))
            norms = np.linalg.norm(direction, axis=-1, keepdims=True)
            direction = np.where(norms > 1e-9, direction / np.where(norms > 1e-9, norms, 1.0), 0.0)
            samples = geo.exp_map(samples, field[:, None] * direction)
        if spec.start_scatter > 0:
            axis = geo.random_point(rng)
            angle = rng.normal(0.0, spec.start_scatter)
            samples = samples @ geo.rodrigues_rotation(axis, angle).T
        out.append(Trajectory(samples))
    return out


def three_group_fixture(per_group: int = 5, grid: int = 100, concentration: float = 1.2,
                        seed: int = 0) -> tuple[list[Trajectory], list[int]]:
    """Warped copies of three distinct base paths, with ground-truth labels."""
    trajectories, labels = [], []
    for g, base in enumerate(("great_arc", "bump", "two_bump")):
        fam = generate_synthetic(SyntheticSpec(base=base, count=per_group,
                                               concentration=concentration,
                                               seed=seed + g, grid=grid))
        trajectories.extend(fam)
        labels.extend([g] * per_group)
    return trajectories, labels


# ---------------------------------------------------------------------------
# exports

def _as_float_list(x) -> list:
    return np.asarray(x, dtype=float).tolist()


def trajectories_to_geojson(trajectories, properties=None) -> str:
    """GeoJSON FeatureCollection with one LineString per trajectory ([lon, lat] order)."""
    features = []
    for k, traj in enumerate(trajectories):
        lat, lon = sphere_to_latlon(traj.samples)
        props = {"id": k}
        if properties is not None:
            props.update(properties[k])
        features.append({
            "type": "Feature",
            "geometry": {
                "type": "LineString",
                "coordinates": [[float(x), float(y)] for x, y in zip(lon, lat)],
            },
            "properties": props,
        })
    return json.dumps({"type": "FeatureCollection", "features": features}, indent=2)


def trajectories_from_geojson(text: str) -> list[Trajectory]:
    doc = json.loads(text)
    out = []
    for feature in doc["features"]:
        coords = np.asarray(feature["geometry"]["coordinates"], dtype=float)
        out.append(Trajectory(latlon_to_sphere(coords[:, 1], coords[:, 0])))
    return out


def trajectories_to_csv(trajectories, ids=None) -> str:
    """Delimited samples: one row (id, k, lat, lon) per sample."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["id", "k", "lat", "lon"])
    for i, traj in enumerate(trajectories):
        lat, lon = sphere_to_latlon(traj.samples)
        name = ids[i] if ids is not None else i
        for k in range(len(traj)):
            writer.writerow([name, k, repr(float(lat[k])), repr(float(lon[k]))])
    return buf.getvalue()


def trajectories_from_csv(text: str) -> list[Trajectory]:
    reader = csv.DictReader(io.StringIO(text))
    rows: dict[str, list] = {}
    for rec in reader:
        rows.setdefault(rec["id"], []).append((int(rec["k"]), float(rec["lat"]), float(rec["lon"])))
    out = []
    for _, fixes in rows.items():
        fixes.sort()
        _, lat, lon = zip(*fixes)
        out.append(Trajectory(latlon_to_sphere(np.array(lat), np.array(lon))))
    return out


def tracks_to_csv(tracks) -> str:
    """Generic track contract: id, RFC-3339 timestamp, lat, lon."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["id", "timestamp", "lat", "lon"])
    for track in tracks:
        for k in range(len(track)):
            stamp = track.times[k].astype(datetime).strftime("%Y-%m-%dT%H:%M:%SZ")
            writer.writerow([track.id, stamp, repr(float(track.lat[k])), repr(float(track.lon[k]))])
    return buf.getvalue()


def export(data, format: str, **kwargs) -> str:
    """Uniform export entry point.

    Trajectory lists export to geojson, csv, or json; richer results carry
    their own ``to_dict`` and export to json (plus geojson where tracks make
    sense, handled by the CLI). Unsupported pairings raise.
    """
    if isinstance(data, (list, tuple)) and all(isinstance(x, Trajectory) for x in data):
        if format == "geojson":
            return trajectories_to_geojson(data, kwargs.get("properties"))
        if format == "csv":
            return trajectories_to_csv(data, kwargs.get("ids"))
        if format == "json":
            return json.dumps(
                {"trajectories": [_as_float_list(t.samples) for t in data]}, indent=2)
        raise UnsupportedCombinationError(f"trajectories cannot export to {format!r}")
    to_dict = getattr(data, "to_dict", None)
    if to_dict is not None and format == "json":
        return json.dumps(to_dict(), indent=2)
    raise UnsupportedCombinationError(f"{type(data).__name__} cannot export to {format!r}")
