import pytest

from magconfine import build_field, make_annulus, make_chart, make_disc


@pytest.fixture(scope="session")
def unit_disc():
    return make_disc(1.0)


@pytest.fixture(scope="session")
def disc_chart(unit_disc):
    return make_chart(unit_disc.component("outer"), 0.5, 0.6)


@pytest.fixture(scope="session")
def annulus():
    return make_annulus(1.0, 2.0)


@pytest.fixture(scope="session")
def annulus_charts(annulus):
    outer = make_chart(annulus.component("outer"), 0.4, 0.5)
    inner = make_chart(annulus.component("inner"), 0.4, 0.5)
    return outer, inner


@pytest.fixture(scope="session")
def fig1_field():
    return build_field("1/(1-r)")


@pytest.fixture(scope="session")
def fig2a_field():
    return build_field("1/(1-r) + 7*y + 5*x^2")


@pytest.fixture(scope="session")
def fig3_field():
    return build_field("1/sqrt(1-r)")
