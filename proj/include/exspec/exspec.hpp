#pragma once

#include "exspec/error.hpp"
#include "exspec/rng.hpp"
#include "exspec/matrix.hpp"
#include "exspec/matrix_io.hpp"
#include "exspec/parallel.hpp"
#include "exspec/stats.hpp"
#include "exspec/spectra.hpp"
#include "exspec/subset.hpp"
#include "exspec/degree.hpp"
#include "exspec/scaling.hpp"
#include "exspec/ensembles.hpp"
#include "exspec/tail.hpp"
#include "exspec/report.hpp"
#include "exspec/verify.hpp"
#include "exspec/manifest.hpp"
