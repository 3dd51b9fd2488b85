"""Walker constellation, terminal sampling, and link enumeration tests."""

import math

import numpy as np
import pytest

from ntn_gscm.constants import EARTH
from ntn_gscm import constellation, frames, orbit
from ntn_gscm.constellation import (
    LinkTable,
    WalkerSpec,
    enumerate_links,
    sample_terminals,
    slant_range_km,
    walker_delta,
    walker_names,
    write_link_csv,
    read_link_csv,
)
from ntn_gscm.frames import TerminalLocation


class TestWalkerDelta:
    def test_four_sats_two_planes(self):
        els = walker_delta(WalkerSpec(4, 2, 0, 550.0, math.radians(53)))
        raans = sorted(round(math.degrees(e.raan0_rad)) % 360 for e in els)
        assert raans == [0, 0, 180, 180]
        for plane in (els[:2], els[2:]):
            anoms = sorted(round(math.degrees(e.nu0_rad)) % 360 for e in plane)
            assert anoms == [0, 180]

    def test_phasing_offset(self):
        els = walker_delta(WalkerSpec(6, 3, 1, 550.0, math.radians(53)))
        # slot 0 of plane 1 is phased by 2*pi*F/T = 60 degrees
        anom_plane1 = math.degrees(els[2].nu0_rad)
        assert anom_plane1 == pytest.approx(60.0, abs=1e-9)

    def test_shared_shape_and_exact_grid(self):
        spec = WalkerSpec(60, 6, 1, 2000.0, math.radians(61))
        els = walker_delta(spec)
        assert len(els) == 60
        assert all(e.e == 0.0 for e in els)
        assert all(e.a_km == EARTH.radius_km + 2000.0 for e in els)
        assert all(e.inc_rad == math.radians(61) for e in els)
        for e in els:
            frac_raan = math.degrees(e.raan0_rad) % 60.0
            assert min(frac_raan, 60 - frac_raan) < 1e-9  # P=6 plane grid

    def test_divisibility_enforced(self):
        with pytest.raises(ValueError):
            WalkerSpec(7, 2, 0, 550.0, 0.9)

    def test_names_match_ordering(self):
        spec = WalkerSpec(4, 2, 1, 550.0, 0.9)
        names = walker_names(spec, "h550")
        assert names == ["h550-p00s00", "h550-p00s01", "h550-p01s00", "h550-p01s01"]


class TestTerminals:
    def test_latitude_truncation(self):
        rng = np.random.default_rng(0)
        terms = sample_terminals(100_000, rng)
        lats = np.array([t.lat_rad for t in terms])
        assert np.max(np.abs(lats)) <= math.radians(53.0)

    def test_area_uniform_split(self):
        # oracle: area-uniform CDF gives sin(26.5)/sin(53) inside 26.5 deg
        rng = np.random.default_rng(1)
        terms = sample_terminals(100_000, rng)
        lats = np.array([t.lat_rad for t in terms])
        frac = np.mean(np.abs(lats) < math.radians(26.5))
        assert frac == pytest.approx(math.sin(math.radians(26.5)) / math.sin(math.radians(53)), abs=0.01)

    def test_fixed_seed_reproducible(self):
        a = sample_terminals(50, np.random.default_rng(7))
        b = sample_terminals(50, np.random.default_rng(7))
        assert [(t.lon_rad, t.lat_rad) for t in a] == [(t.lon_rad, t.lat_rad) for t in b]

    def test_height_default(self):
        terms = sample_terminals(3, np.random.default_rng(2))
        assert all(t.height_m == 1.5 for t in terms)

    def test_positive_count_required(self):
        with pytest.raises(ValueError):
            sample_terminals(0, np.random.default_rng(0))


def law_of_cosines_range(alpha_rad, r_term_km, r_sat_km):
    """Independent slant-range oracle from the spherical triangle."""
    # angle at the terminal between local up and the satellite is 90 - alpha
    gamma = math.pi / 2 + alpha_rad
    # d^2 - 2 d r cos(pi - gamma) ... solve quadratic d^2 + 2 d r sin(alpha) + r^2 - R^2 = 0
    a = 1.0
    b = 2.0 * r_term_km * math.sin(alpha_rad)
    c = r_term_km**2 - r_sat_km**2
    return (-b + math.sqrt(b * b - 4 * a * c)) / (2 * a)


class TestSlantRange:
    def test_zenith(self):
        assert float(slant_range_km(math.pi / 2, 550.0)) == pytest.approx(550.0)

    def test_ten_degrees_550km(self):
        # oracle: law-of-cosines value, computed independently
        d = float(slant_range_km(math.radians(10.0), 550.0))
        oracle = law_of_cosines_range(math.radians(10.0), EARTH.radius_km, EARTH.radius_km + 550.0)
        assert d == pytest.approx(oracle, rel=1e-12)
        assert d == pytest.approx(1815.65, abs=0.01)


def tiny_constellation():
    return walker_delta(WalkerSpec(8, 2, 1, 550.0, math.radians(53)))


class TestEnumerateLinks:
    def test_zenith_link_geometry(self):
        el = tiny_constellation()[0]
        geo = orbit.propagate(el, [0.0])[0]
        term = TerminalLocation(geo.lon_rad, geo.lat_rad)
        links = enumerate_links([el], [term], [0.0], math.radians(10.0))
        assert len(links) == 1
        assert links.elevation_rad[0] == pytest.approx(math.pi / 2, abs=1e-9)
        assert links.distance_m[0] == pytest.approx(550.0e3, rel=1e-6)

    def test_never_visible_pair_yields_no_links(self):
        # equatorial orbit, polar terminal: always below horizon
        el = orbit.OrbitalElements(EARTH.radius_km + 550.0, 0.0, 0.0, 0.0, 0.0, 0.0)
        term = TerminalLocation(0.0, math.radians(89.0))
        links = enumerate_links([el], [term], np.arange(0.0, 5700.0, 60.0), 0.0)
        assert len(links) == 0

    def test_distance_elevation_identity(self):
        # every link satisfies the closed-form slant-range relation
        els = tiny_constellation()
        rng = np.random.default_rng(3)
        terms = sample_terminals(5, rng)
        links = enumerate_links(els, terms, np.arange(0.0, 3600.0, 120.0))
        assert len(links) > 0
        expected = slant_range_km(links.elevation_rad, 550.0) * 1000.0
        assert np.allclose(links.distance_m, expected, rtol=1e-6)

    def test_min_elevation_respected(self):
        els = tiny_constellation()
        terms = sample_terminals(5, np.random.default_rng(4))
        links = enumerate_links(els, terms, np.arange(0.0, 3600.0, 120.0), math.radians(25.0))
        if len(links):
            assert np.min(np.degrees(links.elevation_rad)) >= 25.0

    def test_grazing_floor(self):
        els = tiny_constellation()
        terms = sample_terminals(5, np.random.default_rng(5))
        links = enumerate_links(els, terms, np.arange(0.0, 3600.0, 120.0), 0.0)
        assert np.min(np.degrees(links.elevation_rad)) >= 0.5

    def test_sorted_and_deterministic(self):
        els = tiny_constellation()
        terms = sample_terminals(4, np.random.default_rng(6))
        t = np.arange(0.0, 1800.0, 60.0)
        a = enumerate_links(els, terms, t)
        b = enumerate_links(els, terms, t)
        assert np.array_equal(a.distance_m, b.distance_m)
        order = np.lexsort((a.t_s, a.sat_id, a.term_id))
        assert np.array_equal(order, np.arange(len(a)))

    def test_csv_round_trip(self, tmp_path):
        els = tiny_constellation()
        terms = sample_terminals(3, np.random.default_rng(8))
        links = enumerate_links(els, terms, np.arange(0.0, 1800.0, 300.0))
        path = tmp_path / "links.csv"
        write_link_csv(path, links)
        header = path.read_text().splitlines()[0]
        assert header == "term_id,sat_id,t_s,elev_deg,dist_m,heading_deg"
        loaded = read_link_csv(path, terms)
        assert np.array_equal(loaded.term_id, links.term_id)
        assert np.allclose(loaded.distance_m, links.distance_m, rtol=1e-9)
        assert np.allclose(loaded.elevation_rad, links.elevation_rad, atol=1e-7)
