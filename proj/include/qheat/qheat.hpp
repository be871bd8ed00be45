#pragma once

#include "qheat/error.hpp"
#include "qheat/special.hpp"
#include "qheat/quadrature.hpp"
#include "qheat/bath.hpp"
#include "qheat/model.hpp"
#include "qheat/rates.hpp"
#include "qheat/solvers.hpp"
#include "qheat/transport.hpp"
#include "qheat/config.hpp"
#include "qheat/io.hpp"
#include "qheat/figures.hpp"
#include "qheat/validate.hpp"

namespace qheat {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace qheat
