import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from pixelwatt.colorspace import ColorSpace
from pixelwatt.errors import DataError
from pixelwatt.features import FEATURE_NAMES, correlations, extract_features
from pixelwatt.image import ImageBuffer


def img_of(rows):
    return ImageBuffer(np.array(rows, dtype=np.float64), ColorSpace.SRGB)


def test_solid_red():
    f = extract_features(ImageBuffer.solid(3, 2, (1.0, 0.0, 0.0), ColorSpace.SRGB))
    assert f.mean_lum == pytest.approx(0.5)
    assert f.std_lum == 0.0
    assert f.std_sat == 0.0
    assert f.std_hue == 0.0  # single hue has no dispersion


def test_gray_image_has_no_hue_statistic():
    f = extract_features(ImageBuffer.solid(2, 2, (0.3, 0.3, 0.3), ColorSpace.SRGB))
    assert f.mean_lum == pytest.approx(0.3)
    assert f.std_hue == 0.0


def test_population_std_convention():
    # two lightness levels: population std is 0.5, sample std would be ~0.707
    f = extract_features(img_of([[(0.0, 0.0, 0.0), (1.0, 1.0, 1.0)]]))
    assert f.mean_lum == pytest.approx(0.5)
    assert f.std_lum == pytest.approx(0.5)
    assert f.std_sat == 0.0


def test_two_hue_dispersion_hand_value():
    """Equal mass at hue 0 and hue 90: the resultant length is sqrt(2)/2,
    so the circular std is sqrt(ln 2) and maps to sqrt(ln 2)/sqrt(2)."""
    f = extract_features(img_of([[(1.0, 0.0, 0.0), (0.5, 1.0, 0.0)]]))
    assert f.std_hue == pytest.approx(math.sqrt(math.log(2.0)) / math.sqrt(2.0), abs=1e-12)
    assert f.std_lum == pytest.approx(0.0)
    assert f.std_sat == pytest.approx(0.0)


def test_four_opposed_hues_saturate_scale():
    # hues 0/90/180/270 cancel exactly; the statistic caps at 1
    f = extract_features(
        img_of([[(1.0, 0.0, 0.0), (0.5, 1.0, 0.0), (0.0, 1.0, 1.0), (0.5, 0.0, 1.0)]])
    )
    assert f.std_hue == 1.0


def test_achromatic_pixels_excluded_from_hue():
    # grays carry no usable hue; only the red pixel counts
    f = extract_features(
        img_of([[(1.0, 0.0, 0.0), (0.5, 0.5, 0.5), (0.5, 0.5, 0.5)]])
    )
    assert f.std_hue == 0.0


def test_feature_vector_ordering():
    f = extract_features(ImageBuffer.white(1, 1))
    assert tuple(f.to_dict()) == FEATURE_NAMES
    assert f.as_array().tolist() == [getattr(f, n) for n in FEATURE_NAMES]


def test_requires_srgb():
    from pixelwatt.image import convert_image

    lab = convert_image(ImageBuffer.white(1, 1), ColorSpace.LAB)
    with pytest.raises(ValueError):
        extract_features(lab)


def test_correlations_linear_and_monotone():
    x = [1.0, 2.0, 3.0, 4.0]
    pearson, spearman = correlations(x, [2.0, 4.0, 6.0, 8.0])
    assert pearson == pytest.approx(1.0)
    assert spearman == pytest.approx(1.0)

    pearson, spearman = correlations(x, [1.0, 8.0, 27.0, 64.0])
    assert spearman == pytest.approx(1.0)
    assert pearson < 1.0

    pearson, spearman = correlations(x, [4.0, 3.0, 2.0, 1.0])
    assert pearson == pytest.approx(-1.0)
    assert spearman == pytest.approx(-1.0)


def test_correlations_match_scipy_with_ties():
    rng = np.random.default_rng(3)
    x = rng.integers(0, 5, size=40).astype(float)  # ties on purpose
    y = x + rng.normal(0, 1.5, size=40)
    pearson, spearman = correlations(x, y)
    assert pearson == pytest.approx(stats.pearsonr(x, y).statistic, abs=1e-12)
    assert spearman == pytest.approx(stats.spearmanr(x, y).statistic, abs=1e-12)


def test_correlations_input_validation():
    with pytest.raises(ValueError):
        correlations([1.0, 2.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        correlations([1.0, 2.0, 3.0], [1.0, 2.0])
    with pytest.raises(DataError):
        correlations([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])


@given(seed=st.integers(0, 2**32 - 1), w=st.integers(1, 6), h=st.integers(1, 6))
def test_features_bounded(seed, w, h):
    rng = np.random.default_rng(seed)
    img = ImageBuffer(rng.uniform(0, 1, size=(h, w, 3)), ColorSpace.SRGB)
    f = extract_features(img)
    assert 0.0 <= f.mean_lum <= 1.0
    assert 0.0 <= f.std_lum <= 0.5  # population std over [0, 1] values
    assert 0.0 <= f.std_sat <= 0.5
    assert 0.0 <= f.std_hue <= 1.0
