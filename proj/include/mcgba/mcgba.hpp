// Umbrella header.
#pragma once

#include "mcgba/bal_problem.hpp"
#include "mcgba/camera_model.hpp"
#include "mcgba/lm.hpp"
#include "mcgba/mcg.hpp"
#include "mcgba/normal_equations.hpp"
#include "mcgba/partition.hpp"
#include "mcgba/pcg.hpp"
#include "mcgba/schur_matrix.hpp"
#include "mcgba/synthetic.hpp"
#include "mcgba/types.hpp"
