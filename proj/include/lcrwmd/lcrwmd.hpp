#pragma once

#include "lcrwmd/corpus.hpp"
#include "lcrwmd/distances.hpp"
#include "lcrwmd/emd.hpp"
#include "lcrwmd/engine.hpp"
#include "lcrwmd/error.hpp"
#include "lcrwmd/evaluation.hpp"
#include "lcrwmd/index.hpp"
#include "lcrwmd/io.hpp"
#include "lcrwmd/kernels.hpp"
#include "lcrwmd/matrix.hpp"
#include "lcrwmd/parallel.hpp"
#include "lcrwmd/synthetic.hpp"
#include "lcrwmd/topk.hpp"
