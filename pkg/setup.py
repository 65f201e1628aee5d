from setuptools import setup, find_packages

setup(
    name="HeteroFlow",
    version="1.0.0",
    install_requires=[
        'pytest',
        'numpy~=1.26.4',
        'setuptools~=63.2.0',
        'aiofiles~=23.2.1',
        'scipy~=1.11.4',
    ],
    packages=find_packages(exclude=['tests', 'examples', 'examples.*'])
)
