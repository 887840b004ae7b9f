import keras
from keras.models import Sequential
from keras.layers import Conv2D, Flatten, Dense

n = get_depth()
model = Sequential()
for i in range(n):
    model.add(Conv2D(16, (3, 3), activation='relu', input_shape=(3, 32, 32)))
model.add(Flatten())
model.add(Dense(4, activation='softmax'))
