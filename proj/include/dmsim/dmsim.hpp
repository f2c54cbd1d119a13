#pragma once

#include "dmsim/audit.hpp"
#include "dmsim/config.hpp"
#include "dmsim/error.hpp"
#include "dmsim/functionals.hpp"
#include "dmsim/grid.hpp"
#include "dmsim/harness.hpp"
#include "dmsim/motility.hpp"
#include "dmsim/persist.hpp"
#include "dmsim/report.hpp"
#include "dmsim/run.hpp"
#include "dmsim/scheme.hpp"
#include "dmsim/series.hpp"
#include "dmsim/snapshot_io.hpp"
#include "dmsim/solvers.hpp"
