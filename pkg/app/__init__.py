# app/__init__.py
# Domain packages of the privacy-budget planner
