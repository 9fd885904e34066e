import logging.config


def configure_logging(level: str = "INFO") -> None:
    logging.config.dictConfig(
        {
            "version": 1,
            "disable_existing_loggers": False,
            "formatters": {"generic": {"format": "%(asctime)s %(levelname)s %(name)s: %(message)s"}},
            "handlers": {
                "console": {"class": "logging.StreamHandler", "formatter": "generic", "stream": "ext://sys.stderr"}
            },
            "loggers": {"facedyn": {"level": level, "handlers": ["console"], "propagate": False}},
            "root": {"level": "WARNING", "handlers": ["console"]},
        }
    )
