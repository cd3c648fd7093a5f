from scenebench.stats.anova import (
    AnovaEffect,
    AnovaResult,
    ObservationTable,
    SphericityResult,
    epsilon_from_cov,
    gg_epsilon,
    mauchly_test,
    mixed_anova,
    rm_anova_1w,
    rm_anova_2w,
    sphericity_from_cov,
)
from scenebench.stats.distributions import (
    betainc,
    f_cdf,
    f_sf,
    studentized_range_cdf,
    studentized_range_quantile,
)
from scenebench.stats.posthoc import PosthocMatrix, SystemGroups, cluster_groups, tukey_kramer

__all__ = [
    "AnovaEffect",
    "AnovaResult",
    "ObservationTable",
    "PosthocMatrix",
    "SphericityResult",
    "SystemGroups",
    "betainc",
    "cluster_groups",
    "epsilon_from_cov",
    "f_cdf",
    "f_sf",
    "gg_epsilon",
    "mauchly_test",
    "mixed_anova",
    "rm_anova_1w",
    "rm_anova_2w",
    "sphericity_from_cov",
    "studentized_range_cdf",
    "studentized_range_quantile",
    "tukey_kramer",
]
