#pragma once

#include "qef/classical.hpp"
#include "qef/functionals.hpp"
#include "qef/io.hpp"
#include "qef/linalg.hpp"
#include "qef/modular.hpp"
#include "qef/quadrature.hpp"
#include "qef/superop.hpp"
#include "qef/system.hpp"
#include "qef/transfer.hpp"
