"""texrisk: cross-vendor mammographic texture-risk pipeline at desk scale.

Subpackages: ``imaging`` (flavorization and spatial ops), ``cohort``
(curation), ``scoring`` (ensemble risk scorers), ``evaluation`` (statistics
battery), ``synthdata`` (phantom cohorts), plus the CLI and tuner service.
"""

__version__ = "0.1.0"
