#pragma once

#include "specop/core.hpp"

namespace specop {

struct GaussRule {
    RVec nodes;   // on [-1, 1]
    RVec weights;
};

GaussRule gauss_legendre(int n);

// Lagrange basis values l_m(t) for the given nodes.
RVec lagrange_basis(const RVec& nodes, double t);

} // namespace specop
