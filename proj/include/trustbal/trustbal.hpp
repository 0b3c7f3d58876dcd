#pragma once

#include "trustbal/csv.hpp"
#include "trustbal/em.hpp"
#include "trustbal/errors.hpp"
#include "trustbal/fixture.hpp"
#include "trustbal/impute.hpp"
#include "trustbal/linalg.hpp"
#include "trustbal/missing_patterns.hpp"
#include "trustbal/mvn.hpp"
#include "trustbal/pipeline.hpp"
#include "trustbal/quantiles.hpp"
#include "trustbal/report.hpp"
#include "trustbal/rng.hpp"
#include "trustbal/series.hpp"
#include "trustbal/var.hpp"
#include "trustbal/version.hpp"
