#pragma once

namespace masn {

// Scalar type of every tensor. The library is normally built with double;
// the extended-precision copy used as a finite-difference oracle is built
// with MASN_EXTENDED_PRECISION.
#ifdef MASN_EXTENDED_PRECISION
using Real = long double;
#else
using Real = double;
#endif

}  // namespace masn
