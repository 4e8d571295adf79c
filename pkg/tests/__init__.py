"""Tests __init__.py"""
