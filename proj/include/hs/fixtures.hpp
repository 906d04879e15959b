#pragma once

// Named test mappings shared by the acceptance suite, the command line and
// the Python bindings.

#include <string>
#include <vector>

#include "hs/grid.hpp"
#include "hs/smoothing.hpp"

namespace hs {

/// (x + 0.2 |y - 1/2|, y) on the unit square.
GridMapping shear_kink_fixture(int cells);
/// (x + c min(y, 0), y), the identity on the upper half plane.
MapJet fold_jet(double c = 0.1);
/// The fold map on [0, 1] x [-1/2, 1/2]; row cells/2 lies on y = 0.
GridMapping fold_fixture(int cells, double c = 0.1);
/// z (1 + c min(|z| - 1, 0)), the identity outside the unit disk.
MapJet radial_kink_jet(double c = 0.1);
GridMapping identity_fixture(int cells);
/// The annulus example map on {r < |z| < R} inside [-R, R]^2.
GridMapping annulus_fixture(int cells, double r = 0.5, double R = 2.0);
/// z + 0.1 (1, 0.5) exp(-|z - c|^2 / 0.02) on the unit square.
GridMapping bump_fixture(int cells);

/// "identity", "shear-kink", "fold", "annulus", "bump". Throws hs::Error on
/// an unknown name.
GridMapping make_fixture(const std::string& name, int cells);
std::vector<std::string> fixture_names();

}  // namespace hs
