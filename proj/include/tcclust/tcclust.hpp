#pragma once

#include "tcclust/config.hpp"
#include "tcclust/context.hpp"
#include "tcclust/dataset_io.hpp"
#include "tcclust/error.hpp"
#include "tcclust/evaluation.hpp"
#include "tcclust/gaussian.hpp"
#include "tcclust/inference.hpp"
#include "tcclust/ppf.hpp"
#include "tcclust/report.hpp"
#include "tcclust/result_io.hpp"
#include "tcclust/state.hpp"
#include "tcclust/synthesis.hpp"
#include "tcclust/types.hpp"
