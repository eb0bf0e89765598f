#pragma once

#include "srelasso/error.hpp"
#include "srelasso/rng.hpp"
#include "srelasso/parallel.hpp"
#include "srelasso/data_model.hpp"
#include "srelasso/csv_io.hpp"
#include "srelasso/lasso.hpp"
#include "srelasso/lrv.hpp"
#include "srelasso/penalty.hpp"
#include "srelasso/debias.hpp"
#include "srelasso/inference.hpp"
#include "srelasso/dgp.hpp"
#include "srelasso/config.hpp"
#include "srelasso/commands.hpp"
