#pragma once

#include "latentlin/bayesnet.hpp"
#include "latentlin/decomp.hpp"
#include "latentlin/eca.hpp"
#include "latentlin/error.hpp"
#include "latentlin/experiment.hpp"
#include "latentlin/hier.hpp"
#include "latentlin/io.hpp"
#include "latentlin/l1solver.hpp"
#include "latentlin/linalg.hpp"
#include "latentlin/metrics.hpp"
#include "latentlin/model.hpp"
#include "latentlin/moments.hpp"
#include "latentlin/recovery.hpp"
#include "latentlin/synth.hpp"
#include "latentlin/verify.hpp"
