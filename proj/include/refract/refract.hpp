#pragma once

#include "refract/charroots.hpp"
#include "refract/distribution.hpp"
#include "refract/errors.hpp"
#include "refract/expsum.hpp"
#include "refract/kernels.hpp"
#include "refract/laplace.hpp"
#include "refract/mc.hpp"
#include "refract/model.hpp"
#include "refract/polynomial.hpp"
#include "refract/pricing.hpp"
#include "refract/wiener_hopf.hpp"
