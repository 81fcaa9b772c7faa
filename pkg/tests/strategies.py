from hypothesis import strategies as st

from builders import random_parents


@st.composite
def trees(draw, min_uavs=1, max_uavs=20):
    J = draw(st.integers(min_uavs, max_uavs))
    order = draw(st.permutations(range(J)))
    picks = draw(st.lists(st.floats(0, 1, exclude_max=True), min_size=J, max_size=J))
    return random_parents(order, picks)
