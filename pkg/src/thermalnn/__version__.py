__title__ = "thermalnn"
__description__ = "Thermal neural networks: lumped-parameter thermal models with learned conductances, losses and capacitances"
__version__ = "0.1.0"
__author__ = "CEMS BV"
__author_email__ = "info@cemsbv.nl"
__license__ = "MIT"
__copyright__ = "Copyright (c) CEMS BV"
