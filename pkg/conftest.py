import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'PuSmiLab.settings')
django.setup()
