#ifndef NCOT_NCOT_HPP
#define NCOT_NCOT_HPP

#include "ncot/errors.hpp"
#include "ncot/algebra.hpp"
#include "ncot/calculus.hpp"
#include "ncot/means.hpp"
#include "ncot/operator_means.hpp"
#include "ncot/action.hpp"
#include "ncot/functionals.hpp"
#include "ncot/semigroup.hpp"
#include "ncot/report.hpp"
#include "ncot/transport.hpp"
#include "ncot/verify.hpp"

#endif // NCOT_NCOT_HPP
