#pragma once

#include "pgen/constructions.hpp"
#include "pgen/digits.hpp"
#include "pgen/errors.hpp"
#include "pgen/measure.hpp"
#include "pgen/rational.hpp"
#include "pgen/stats.hpp"
#include "pgen/version.hpp"
#include "pgen/words.hpp"
