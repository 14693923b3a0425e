# Settings, logging and errors
