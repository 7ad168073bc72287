"""Test suite for the stochastic NLS package"""
