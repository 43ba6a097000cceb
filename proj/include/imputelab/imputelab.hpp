#pragma once

#include "imputelab/alias_table.hpp"
#include "imputelab/bounds.hpp"
#include "imputelab/error.hpp"
#include "imputelab/estimators.hpp"
#include "imputelab/hla.hpp"
#include "imputelab/logit.hpp"
#include "imputelab/parallel.hpp"
#include "imputelab/population.hpp"
#include "imputelab/rng.hpp"
#include "imputelab/sampling.hpp"
