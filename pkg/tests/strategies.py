"""Shared hypothesis strategies: small random grid fields."""

import numpy as np
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sepergy.grid import GridFunction, ProductDomain

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False, width=64)
thetas = st.floats(0.1, 2.0)


dyadic = st.integers(-160, 160).map(lambda k: k / 16)


@st.composite
def fields(draw, min_side=4, max_side=10, periodic=None, elements=finite):
    n1 = draw(st.integers(min_side, max_side))
    n2 = draw(st.integers(min_side, max_side))
    per = draw(st.booleans()) if periodic is None else periodic
    values = draw(arrays(np.float64, (n1, n2), elements=elements))
    return GridFunction(ProductDomain(((0.0, 1.0),), ((0.0, 1.0),), per), values)


@st.composite
def factor_profiles(draw, n1=8, n2=8):
    f = draw(arrays(np.float64, n1, elements=finite))
    g = draw(arrays(np.float64, n2, elements=finite))
    return f, g
