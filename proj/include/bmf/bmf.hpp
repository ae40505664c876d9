#pragma once

#include "bmf/corpus.hpp"
#include "bmf/error.hpp"
#include "bmf/eval.hpp"
#include "bmf/functionals.hpp"
#include "bmf/gradcheck.hpp"
#include "bmf/io.hpp"
#include "bmf/lld.hpp"
#include "bmf/net.hpp"
#include "bmf/pipeline.hpp"
