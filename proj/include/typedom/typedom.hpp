#pragma once

#include "typedom/affinity_propagation.hpp"
#include "typedom/cn_pairs.hpp"
#include "typedom/dataset.hpp"
#include "typedom/domains.hpp"
#include "typedom/embeddings.hpp"
#include "typedom/error.hpp"
#include "typedom/eval.hpp"
#include "typedom/io.hpp"
#include "typedom/lle.hpp"
#include "typedom/neighbourhood.hpp"
#include "typedom/postprocess.hpp"
