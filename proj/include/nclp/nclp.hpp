#pragma once

#include "nclp/algebra.hpp"
#include "nclp/errors.hpp"
#include "nclp/factorization.hpp"
#include "nclp/holder.hpp"
#include "nclp/io.hpp"
#include "nclp/lewis.hpp"
#include "nclp/opspace.hpp"
#include "nclp/optimize.hpp"
#include "nclp/random.hpp"
