#ifndef MISCORR_MISCORR_HPP
#define MISCORR_MISCORR_HPP

#include "bootstrap.hpp"
#include "config.hpp"
#include "core.hpp"
#include "dataset.hpp"
#include "effects.hpp"
#include "glm.hpp"
#include "mcmc.hpp"
#include "mediation.hpp"
#include "random.hpp"
#include "report.hpp"
#include "roc.hpp"
#include "run.hpp"
#include "simulate.hpp"
#include "single.hpp"
#include "squarem.hpp"
#include "twostage.hpp"

#endif
